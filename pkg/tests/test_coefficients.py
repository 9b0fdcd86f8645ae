import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampscat import coefficients as C
from dampscat.errors import DomainError, ValidationError


def test_lambda_zero_coefficient():
    assert C.lambda_at(C.zero(), 7.0) == pytest.approx(1.0, abs=0)


def test_lambda_mu_over_1pt_closed_form():
    assert C.lambda_at(C.mu_over_1pt(0.3), 9.0) == pytest.approx(10**0.3, rel=1e-12)
    assert 10**0.3 == pytest.approx(1.99526, abs=1e-5)


@given(st.floats(0.0, 1e4), st.floats(0.0, 1.0))
def test_primitive_matches_log(t, mu):
    c = C.mu_over_1pt(mu)
    assert float(C.primitive_at(c, t)) == pytest.approx(mu * math.log1p(t), rel=1e-10, abs=1e-14)


def test_iterated_log_lambda_comparable_to_log_squared():
    c = C.iterated_log(2.0, 1)
    t = np.geomspace(1.0, 1e6, 40)
    r = np.asarray(C.lambda_at(c, t)) / np.log(math.e + t) ** 2
    assert 0.0 < r.min() and r.max() / r.min() < 5.0


def test_quadrature_matches_closed_form_for_tabulated():
    t = np.linspace(0.0, 50.0, 2001)
    b = 0.3 / (1.0 + t)
    c = C.tabulated(t, b, -0.3 / (1.0 + t) ** 2)
    assert float(C.primitive_at(c, 20.0)) == pytest.approx(0.3 * math.log(21.0), rel=1e-5)


def test_tail_integral_values():
    assert C.tail_integral(C.power_law(2.0), 9.0) == pytest.approx(0.1, rel=1e-10)
    assert C.tail_integral(C.zero(), 3.0) == 0.0
    assert C.tail_integral(C.mu_over_1pt(0.3), 0.0, 1e3) == pytest.approx(
        0.3 * math.log(1001.0), rel=1e-10)


def test_tail_integral_diverges_for_non_integrable():
    with pytest.raises(DomainError):
        C.tail_integral(C.mu_over_1pt(0.3), 0.0)


def test_lambda_ratio_and_infinity():
    c = C.power_law(2.0)
    assert C.lambda_infinity(c) == pytest.approx(math.e, rel=1e-10)
    assert C.lambda_ratio(c, 0.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_classify_c1():
    reg = C.classify(C.mu_over_1pt(0.3))
    assert reg.tag == "C1" and reg.gamma_index == 0.0
    assert reg.lemma_gamma == pytest.approx(0.6)
    assert reg.gamma_2mu_admissible


def test_classify_integrable():
    reg = C.classify(C.power_law(2.0))
    assert reg.tag == "Integrable" and not reg.normalizes_by_lambda


def test_classify_c2_gamma_index():
    reg = C.classify(C.mu_over_1pt(1.0), mu_plus=1.01)
    assert reg.tag == "C2" and reg.gamma_index == pytest.approx(0.01)


def test_classify_footnote_flags_gamma_2mu():
    # the logarithmic excess only shows on very long horizons
    reg = C.classify(C.footnote_counterexample(), horizon=1e12)
    assert reg.tag == "C1" and not reg.gamma_2mu_admissible


def test_half_is_unclassified():
    assert C.classify(C.mu_over_1pt(0.5)).tag == "Unclassified"


def test_negative_b_is_rejected():
    c = C.custom(lambda t: -0.1 / (1.0 + t), lambda t: 0.1 / (1.0 + t) ** 2)
    with pytest.raises(ValidationError) as info:
        C.classify(c)
    assert info.value.witness == 0.0


def test_false_declaration_is_contradicted():
    c = C.from_spec({"kind": "mu_over_1pt", "mu": 0.3, "mu_upper": 0.1})
    with pytest.raises(ValidationError):
        C.classify(c)


def test_declared_tags():
    assert C.declared_tag(C.zero()) == "Integrable"
    assert C.declared_tag(C.mu_over_1pt(0.3)) == "C1"
    assert C.declared_tag(C.mu_over_1pt(0.75)) == "C2"


def test_from_spec_rejects_unknown_kind():
    with pytest.raises(DomainError):
        C.from_spec({"kind": "nope"})


def test_reflected_even_extension():
    # no explicit past: b(-t) = b(t)
    c = C.power_law(2.0)
    r = c.reflected()
    for t in (0.0, 0.5, 3.0):
        assert float(r.b(t)) == pytest.approx(-float(c.b(t)))
    rr = r.reflected()
    assert float(rr.b(2.0)) == pytest.approx(float(c.b(2.0)))


def test_reflected_uses_past():
    past = C.mu_over_1pt(0.2)
    c = replace(C.power_law(2.0), past=past)
    assert float(c.reflected().b(1.0)) == pytest.approx(-0.1)
