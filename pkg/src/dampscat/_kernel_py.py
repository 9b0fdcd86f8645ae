"""Pure-Python integration kernel (fallback for the compiled ``_kernel_c``).

Integrates the linear 2x2 matrix ODE ``Y' = F(t) Y`` with the adaptive
Dormand-Prince 8(5,3) pair.  ``F`` is selected by ``system``:

``SYS_FUNDAMENTAL``  ``[[0, lam], [-lam, -2 b]]``
``SYS_Q1``           ``E0~(s,t) R1(t) E0~(t,s)`` of the diagonalised system
``SYS_CLASSICAL``    ``-2 b E0(s-t) diag(0,1) E0(t-s)``

The algorithm, step control and floating-point evaluation order mirror
``_kernel_c.pyx`` so that both backends agree to rounding.
"""

import math

from ._tableau import A, B, C, E3, E5, N_STAGES

NAME = "python"

SYS_FUNDAMENTAL = 0
SYS_Q1 = 1
SYS_CLASSICAL = 2

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2
STATUS_NONFINITE = 3
STATUS_CALLBACK = 4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

_E1 = math.e
_E2 = math.exp(_E1)
_E3 = math.exp(_E2)
_SHIFTS = (_E1, _E2, _E3)

# sparse copy of the stage matrix
_ROWS = tuple(tuple((j, a) for j, a in enumerate(row) if a != 0.0) for row in A)
_BW = tuple((j, w) for j, w in enumerate(B) if w != 0.0)


def coefficient(kind, params, callback, t):
    """Return ``(b(t), b'(t))`` for a kernel coefficient code."""
    if kind == 0:
        return 0.0, 0.0
    if kind == 1:
        a, p = params[0], params[1]
        x = 1.0 + t
        v = a * x ** (-p)
        return v, -p * v / x
    if kind == 2:
        mu, n = params[0], int(params[1])
        den = 1.0 + t
        rate = 1.0 / den
        for k in range(1, n + 1):
            x = _SHIFTS[k - 1] + t
            d = 1.0
            for _ in range(k):
                d = d / x
                x = math.log(x)
            den = den * x
            rate = rate + d / x
        v = mu / den
        return v, -v * rate
    if kind == 3:
        sc = params[0]
        x = _E1 + t
        lg = math.log(x)
        v = 0.25 / x + 1.0 / (x * lg)
        dv = -0.25 / (x * x) - (lg + 1.0) / ((x * lg) * (x * lg))
        return sc * v, sc * dv
    return callback(t)


def _rhs_matrix(system, kind, params, callback, lam, s_ref, t):
    b, bp = coefficient(kind, params, callback, t)
    if system == SYS_FUNDAMENTAL:
        return 0.0, lam, -lam, -2.0 * b
    if system == SYS_Q1:
        beta = b / (2.0 * lam)
        dbeta = bp / (2.0 * lam)
        den = 1.0 - beta * beta
        d = beta * dbeta / den
        im = b * beta / den
        off = -b * beta * beta / den
        dd = dbeta / den
        x = 2.0 * lam * (t - s_ref)
        e = complex(math.cos(x), math.sin(x))
        return (complex(d, im), e * complex(off, -dd),
                e.conjugate() * complex(off, dd), complex(d, -im))
    th = lam * (t - s_ref)
    c = math.cos(th)
    s = math.sin(th)
    f = -2.0 * b
    return f * s * s, -f * s * c, -f * s * c, f * c * c


def _apply(F, y):
    f00, f01, f10, f11 = F
    y00, y01, y10, y11 = y
    return (f00 * y00 + f01 * y10, f00 * y01 + f01 * y11,
            f10 * y00 + f11 * y10, f10 * y01 + f11 * y11)


def _rms_scaled(v, scale):
    return math.sqrt(sum(abs(v[i] / scale[i]) ** 2 for i in range(4)) / 4.0)


def propagate(system, kind, params, callback, lam, s_ref, t0, y0, times,
              rtol, atol, hmax, max_steps):
    """Integrate from ``t0`` (state ``y0``, 4 entries row-major) through ``times``.

    Returns ``(states, nsteps, status, t_fail)`` where ``states`` is a list of
    4-tuples, one per requested time.
    """
    params = tuple(float(p) for p in params)

    def rhs(t, y):
        return _apply(_rhs_matrix(system, kind, params, callback, lam, s_ref, t), y)

    t = float(t0)
    y = tuple(complex(v) for v in y0)
    out = []
    nsteps = 0
    k_out = 0
    n_out = len(times)
    while k_out < n_out and times[k_out] <= t:
        out.append(y)
        k_out += 1
    if k_out == n_out:
        return out, 0, STATUS_OK, 0.0

    try:
        f0 = rhs(t, y)
    except Exception:
        return out, 0, STATUS_CALLBACK, t

    # initial step (Hairer, Norsett & Wanner, II.4)
    scale = [atol + abs(v) * rtol for v in y]
    d0 = _rms_scaled(y, scale)
    d1 = _rms_scaled(f0, scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, hmax)
    try:
        y1 = tuple(y[i] + h0 * f0[i] for i in range(4))
        f1 = rhs(t + h0, y1)
    except Exception:
        return out, 0, STATUS_CALLBACK, t
    d2 = _rms_scaled(tuple(f1[i] - f0[i] for i in range(4)), scale) / h0
    dm = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** (1.0 / 8.0)
    h_abs = min(100.0 * h0, h1, hmax)

    K = [None] * (N_STAGES + 1)
    K[0] = f0
    rejected = False
    while k_out < n_out:
        target = times[k_out]
        if nsteps >= max_steps:
            return out, nsteps, STATUS_MAX_STEPS, t
        min_step = 10.0 * (math.nextafter(t, math.inf) - t)
        if h_abs < min_step:
            return out, nsteps, STATUS_UNDERFLOW, t
        h = h_abs
        land = False
        if t + h >= target:
            h = target - t
            land = True
        else:
            # step by the representable increment so that t tracks y exactly
            h = (t + h) - t
        try:
            for i in range(1, N_STAGES):
                acc0 = acc1 = acc2 = acc3 = 0.0
                for j, a in _ROWS[i]:
                    kj = K[j]
                    acc0 += a * kj[0]
                    acc1 += a * kj[1]
                    acc2 += a * kj[2]
                    acc3 += a * kj[3]
                yi = (y[0] + h * acc0, y[1] + h * acc1, y[2] + h * acc2, y[3] + h * acc3)
                K[i] = rhs(t + C[i] * h, yi)
            acc0 = acc1 = acc2 = acc3 = 0.0
            for j, w in _BW:
                kj = K[j]
                acc0 += w * kj[0]
                acc1 += w * kj[1]
                acc2 += w * kj[2]
                acc3 += w * kj[3]
            y_new = (y[0] + h * acc0, y[1] + h * acc1, y[2] + h * acc2, y[3] + h * acc3)
            t_new = target if land else t + h
            K[N_STAGES] = rhs(t_new, y_new)
        except Exception:
            return out, nsteps, STATUS_CALLBACK, t

        e5sq = 0.0
        e3sq = 0.0
        for i in range(4):
            sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
            s5 = 0.0
            s3 = 0.0
            for j in range(N_STAGES + 1):
                kij = K[j][i]
                s5 += E5[j] * kij
                s3 += E3[j] * kij
            e5sq += abs(s5 / sc) ** 2
            e3sq += abs(s3 / sc) ** 2
        if e5sq == 0.0 and e3sq == 0.0:
            err = 0.0
        else:
            err = abs(h) * e5sq / math.sqrt((e5sq + 0.01 * e3sq) * 4.0)
        if not math.isfinite(err):
            return out, nsteps, STATUS_NONFINITE, t

        if err < 1.0:
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXP)
            if rejected:
                factor = min(1.0, factor)
            if not land:
                h_abs = min(h_abs * factor, hmax)
            else:
                h_abs = min(max(h_abs, h * factor) if factor > 1.0 else h_abs * factor, hmax)
            rejected = False
            t = t_new
            y = y_new
            K[0] = K[N_STAGES]
            nsteps += 1
            while k_out < n_out and times[k_out] <= t:
                out.append(y)
                k_out += 1
        else:
            h_abs = (h if land else h_abs) * max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            rejected = True
    return out, nsteps, STATUS_OK, t
