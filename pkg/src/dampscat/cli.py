"""Command-line front end.

Exit codes: 0 success, 2 check failure, 3 configuration error, 4 numerical
failure.  Every CSV ends with a ``# config_hash=..., version=...`` line and
is accompanied by a ``<name>.diag.json`` diagnostics file.  Output depends only on
the configuration and seed, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, suites
from .coefficients import classify, declared_tag, lambda_at
from .config import load_config
from .errors import (CheckFailure, ConfigError, DomainError, NumericalError,
                     ValidationError)
from .propagator import evolve
from .scattering import (WaveOperatorTable, build_wave_operator_table, default_normalization,
                         scattering_op, scattering_residual, two_sided_ratio)

log = logging.getLogger("dampscat")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, header, rows, cfg, extra_meta=None):
    """Write ``rows`` with 17 significant digits and the metadata trailer."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    meta = f"# config_hash={cfg.config_hash()}, version={__version__}"
    lines.append(meta)
    for k, v in (extra_meta or {}).items():
        lines.append(f"# {k}={v}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def write_diagnostics(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _diag_path(out):
    return Path(out).with_suffix(".diag.json")


def _sibling(out, suffix):
    out = Path(out)
    return out.with_name(f"{out.stem}_{suffix}.csv")


def _out(args, default):
    return Path(args.out) if args.out else Path(default)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg, args):
    model, coeff = cfg.spectral_model(), cfg.coefficient_model()
    traj = evolve(model, coeff, cfg.data_vector(), cfg.time_grid(), cfg.tol, args.threads)
    out = _out(args, "trajectory.csv")
    write_csv(out, traj.header(args.dump_modes), traj.rows(args.dump_modes), cfg)
    return EXIT_OK, {"out": str(out), "modes": len(model)}


def cmd_classify(cfg, args):
    coeff = cfg.coefficient_model()
    c = cfg.raw["classify"]
    out = _out(args, "classify.csv")
    try:
        reg = classify(coeff, horizon=float(c["horizon"]), grid_size=int(c["grid_size"]),
                       tol=float(c["tol"]), mu_plus=cfg.mu_plus, lemma_gamma=cfg.raw["gamma"])
    except ValidationError as exc:
        write_csv(out, ("tag", "witness_t"), [("contradicted", exc.witness)], cfg)
        return EXIT_CHECK, {"error": str(exc), "witness_t": exc.witness}
    header = ("tag", "gamma_index", "lemma_gamma", "mu_plus", "gamma_2mu_admissible",
              "tb_sup", "tb_inf")
    row = (reg.tag, reg.gamma_index, reg.lemma_gamma, reg.mu_plus, reg.gamma_2mu_admissible,
           reg.tb_sup, reg.tb_inf)
    write_csv(out, header, [row], cfg)
    return EXIT_OK, {"regime": reg.__dict__}


def _table(cfg, args, with_minus=None):
    coeff, model = cfg.coefficient_model(), cfg.spectral_model()
    zone_n, esc = suites.resolve_zone_n(cfg, coeff)
    w = cfg.raw["wave_op"]
    table = build_wave_operator_table(
        model, coeff, tol=cfg.limit_tol, horizon_cap=float(cfg.raw["horizon_cap"]),
        zone_n=zone_n, direct_horizon=cfg.raw["direct_horizon"],
        with_minus=w["with_minus"] if with_minus is None else with_minus,
        normalization=w["normalization"], threads=args.threads)
    return table, zone_n, esc


def cmd_wave_op(cfg, args):
    table, zone_n, esc = _table(cfg, args)
    out = _out(args, "waveop.csv")
    meta = {"normalization": table.normalization, "regime": table.regime}
    write_csv(out, WaveOperatorTable.HEADER, table.rows(), cfg, meta)
    info = {"normalization": table.normalization, "regime": table.regime, "zone_n": zone_n,
            "zone_doublings": esc, "min_singular_values": table.min_singular_values(),
            "path_discrepancy": table.extra["direct_discrepancy"]}
    if table.w_minus is not None:
        rows_m, rows_s = [], []
        for k, lam in enumerate(table.lambdas):
            Wm = table.w_minus[k]
            S = scattering_op(table.w_plus[k], Wm)
            rows_m.append([lam, *Wm.ravel(), table.conv_error[k], table.horizon[k]])
            rows_s.append([lam, *S.ravel(), abs(np.linalg.det(S))])
        write_csv(_sibling(out, "minus"), WaveOperatorTable.HEADER, rows_m, cfg, meta)
        write_csv(_sibling(out, "scattering"), ("lambda", "s11", "s12", "s21", "s22", "abs_det"),
                  rows_s, cfg, meta)
    return EXIT_OK, info


def cmd_scatter_residual(cfg, args):
    coeff, model = cfg.coefficient_model(), cfg.spectral_model()
    if args.waveop:
        norm = cfg.raw["wave_op"]["normalization"] or default_normalization(coeff)
        try:
            table = WaveOperatorTable.read_csv(args.waveop, norm, declared_tag(coeff))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read wave-operator table {args.waveop}: {exc}") from exc
    else:
        table, _, _ = _table(cfg, args, with_minus=False)
    rows = scattering_residual(model, coeff, cfg.data_vector(), table, cfg.time_grid(),
                               cfg.tol, args.threads)
    out = _out(args, "residual.csv")
    write_csv(out, ("t", "lambda_t", "residual", "energy_u", "energy_v"),
              [(r.t, r.lambda_t, r.residual, r.energy_u, r.energy_v) for r in rows], cfg,
              {"normalization": table.normalization})
    return EXIT_OK, {"normalization": table.normalization,
                     "lambda_factor": table.normalization == "modified"}


def cmd_two_sided(cfg, args):
    coeff, model = cfg.coefficient_model(), cfg.spectral_model()
    series = two_sided_ratio(model, coeff, cfg.data_vector(), cfg.time_grid(), cfg.tol,
                             args.threads)
    vals = np.array([v for _, v in series])
    out = _out(args, "ratio.csv")
    lam_t = np.asarray(lambda_at(cfg.coefficient_model(), [t for t, _ in series]), dtype=float)
    rows = [(t, lt, v / lt, v) for (t, v), lt in zip(series, lam_t)]
    write_csv(out, ("t", "lambda_t", "energy_E", "ratio"), rows, cfg)
    return EXIT_OK, {"c": vals.min(), "C": vals.max(), "C_over_c": vals.max() / vals.min()}


def cmd_verify(cfg, args):
    names = suites.SUITES if args.suite == "all" else (args.suite,)
    out = _out(args, "verify.csv")
    summary, info = [], {}
    failed = False
    for name in names:
        log.info("running suite %s", name)
        res = suites.RUNNERS[name](cfg, args.threads)
        if res.skipped:
            summary.append((name, "skipped", float("nan"), float("nan"), "skipped"))
            info[name] = {"skipped": res.skipped}
            continue
        write_csv(_sibling(out, name.replace("-", "_")), res.header, res.rows, cfg)
        for c in res.checks:
            summary.append((name, c.name, c.value, c.threshold, "pass" if c.passed else "fail"))
        failed |= not res.passed
        info[name] = {"passed": res.passed, "witnesses": res.witnesses(), **res.info}
    write_csv(out, ("suite", "check", "value", "threshold", "result"), summary, cfg)
    return (EXIT_CHECK if failed else EXIT_OK), info


COMMANDS = {
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "wave-op": cmd_wave_op,
    "scatter-residual": cmd_scatter_residual,
    "two-sided": cmd_two_sided,
    "verify": cmd_verify,
}


GLOBAL_DEFAULTS = {"config": None, "out": None, "threads": None, "seed": None,
                   "verbose": False}


def build_parser():
    # SUPPRESS keeps a subparser from resetting options given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="experiment TOML file")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--verbose", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="dampscat", parents=[common],
                                description="Scattering for weakly damped wave equations.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", parents=[common], help="evolve data, write energies")
    sp.add_argument("--dump-modes", action="store_true")
    sub.add_parser("classify", parents=[common], help="check the declared regime")
    sub.add_parser("wave-op", parents=[common], help="per-mode wave operators")
    sp = sub.add_parser("scatter-residual", parents=[common], help="asymptotic equivalence")
    sp.add_argument("--waveop", help="wave-operator table from `wave-op`")
    sub.add_parser("two-sided", parents=[common], help="lambda(t) times the energy")
    sp = sub.add_parser("verify", parents=[common], help="verification suites")
    sp.add_argument("suite", nargs="?", default="all", choices=("all",) + suites.SUITES)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    for k, v in GLOBAL_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.threads is not None:
            overrides["threads"] = args.threads
        if overrides:
            cfg = cfg.with_overrides(**overrides)
    except ConfigError as exc:
        # nothing is written; the diagnostics go to stderr
        payload = {"command": args.command, "status": "config_error",
                   "exit_code": EXIT_CONFIG, "message": str(exc), "version": __version__}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    args.threads = int(cfg.raw["threads"])
    out = _out(args, {"simulate": "trajectory.csv", "classify": "classify.csv",
                      "wave-op": "waveop.csv", "scatter-residual": "residual.csv",
                      "two-sided": "ratio.csv", "verify": "verify.csv"}[args.command])
    args.out = str(out)
    payload = {"command": args.command, "config_hash": cfg.config_hash(), "version": __version__}
    try:
        code, info = COMMANDS[args.command](cfg, args)
        payload.update(status="ok" if code == EXIT_OK else "check_failure", info=info)
    except (ConfigError, DomainError) as exc:
        code = EXIT_CONFIG
        payload.update(status="config_error", message=str(exc))
    except (CheckFailure, ValidationError) as exc:
        code = EXIT_CHECK
        payload.update(status="check_failure", message=str(exc),
                       witness=getattr(exc, "witness", None))
    except NumericalError as exc:
        code = EXIT_NUMERIC
        payload.update(status="numerical_failure", error=type(exc).__name__, message=str(exc),
                       t=getattr(exc, "t", None))
    payload["exit_code"] = code
    write_diagnostics(_diag_path(out), payload)
    if code != EXIT_OK:
        print(json.dumps(_jsonable({k: payload[k] for k in ("status", "exit_code")}),
                         sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
