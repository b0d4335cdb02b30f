"""Batch command-line front end.

Commands read a YAML config (key-value with nested sections), optionally
patched by ``--set section.key=value`` overrides, run the requested
computation, and emit CSV files plus an ``effective_config.yaml`` echo of
the exact configuration used, so every run is reproducible from its own
output directory.

Exit codes: 0 success, 2 configuration/validation failure, 3 solver
non-convergence, 4 discrepancy-principle / study failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from ._io import fmt, write_csv
from .operators import (
    BidiagonalSum,
    Diagonal,
    Embedding,
    FirstRowSummation,
    Identity,
    assemble,
    conditioning_scan,
    weak_star_diagnostic,
)
from .parameter_choice import APrioriRule, SDPRule
from .presets import PRESETS, preset_config
from .rates import (
    RateStudyConfig,
    predicted_exponent,
    run_rate_study,
    write_plot_csv,
    write_records_csv,
    write_summary_csv,
)
from .sequences import ExponentialDecay, Norm, PowerDecay, Sparse
from .solver import TikhonovProblem, solve_tikhonov
from .source_conditions import (
    GammaMode,
    SmoothnessProfile,
    TailMode,
    certify_witness,
    gamma_from_sources,
    phi_eval,
    property1_witness_bidiagonal,
    standard_sources,
    vsc_check,
)

__all__ = ["main", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_SDP = 4


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


def _get(cfg, key, path, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}{key}: missing required field")
        return default
    return cfg[key]


def _wrap(path, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_operator(cfg, path="operator"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a mapping with a 'kind' field")
    kind = _get(cfg, "kind", path + ".", required=True)
    if kind == "identity":
        return Identity()
    if kind == "embedding":
        return _wrap(path, Embedding, q=float(_get(cfg, "q", path + ".", default=2.0)))
    if kind == "bidiagonal-sum":
        return BidiagonalSum()
    if kind == "first-row-summation":
        return FirstRowSummation()
    if kind == "diagonal":
        if "values" in cfg:
            return _wrap(path, Diagonal, values=tuple(cfg["values"]))
        if "power" in cfg:
            return _wrap(path, Diagonal, power=float(cfg["power"]))
        raise ConfigError(f"{path}: diagonal operator needs 'values' or 'power'")
    raise ConfigError(f"{path}.kind: unknown operator kind {kind!r}")


def build_model(cfg, path="model"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a mapping with a 'kind' field")
    kind = _get(cfg, "kind", path + ".", required=True)
    if kind == "sparse":
        idx = _get(cfg, "indices", path + ".", required=True)
        val = _get(cfg, "values", path + ".", required=True)
        return _wrap(path, Sparse, tuple(idx), tuple(val))
    if kind == "power":
        return _wrap(path, PowerDecay, theta=float(_get(cfg, "theta", path + ".", required=True)),
                     scale=float(_get(cfg, "scale", path + ".", default=1.0)))
    if kind == "exponential":
        return _wrap(path, ExponentialDecay, rate=float(_get(cfg, "rate", path + ".", required=True)),
                     scale=float(_get(cfg, "scale", path + ".", default=1.0)))
    raise ConfigError(f"{path}.kind: unknown model kind {kind!r}")


def build_gamma(cfg, path="gamma"):
    if cfg is None:
        cfg = {"kind": "linear"}
    kind = _get(cfg, "kind", path + ".", required=True)
    if kind == "linear":
        return lambda n: float(n)
    if kind == "constant":
        value = float(_get(cfg, "value", path + ".", required=True))
        if not value > 0:
            raise ConfigError(f"{path}.value: must be positive, got {value}")
        return lambda n: value
    if kind == "power":
        exponent = float(_get(cfg, "exponent", path + ".", required=True))
        if exponent < 0:
            raise ConfigError(f"{path}.exponent: must be nonnegative for a "
                              f"nondecreasing sequence, got {exponent}")
        return lambda n: float(n) ** exponent
    raise ConfigError(f"{path}.kind: unknown gamma kind {kind!r}")


def build_profile(cfg, model, default_n_max, path="profile"):
    gamma = build_gamma(_get(cfg, "gamma", path + "."), path=path + ".gamma")
    n_max = int(_get(cfg, "n_max", path + ".", default=default_n_max))
    return _wrap(path, SmoothnessProfile.from_model, model, gamma, n_max)


def build_phi(cfg, model, default_n_max, path="rule.phi"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a mapping with a 'kind' field")
    kind = _get(cfg, "kind", path + ".", required=True)
    if kind == "linear":
        k = float(_get(cfg, "constant", path + ".", default=1.0))
        if not k > 0:
            raise ConfigError(f"{path}.constant: must be positive")
        return lambda t: k * t
    if kind == "power":
        a = float(_get(cfg, "exponent", path + ".", required=True))
        c = float(_get(cfg, "scale", path + ".", default=1.0))
        if not 0 < a <= 1:
            raise ConfigError(f"{path}.exponent: concavity needs 0 < exponent <= 1, got {a}")
        if not c > 0:
            raise ConfigError(f"{path}.scale: must be positive")
        return lambda t: c * t ** a
    if kind == "profile":
        profile = build_profile(cfg, model, default_n_max, path=path)
        # the truncated infimum has a floor of 2*tail(n_max) at t = 0;
        # subtracting it restores phi(0) = 0 without harming concavity
        floor = phi_eval(profile, 0.0).value
        return lambda t: phi_eval(profile, float(t)).value - floor
    raise ConfigError(f"{path}.kind: unknown phi kind {kind!r}")


def build_rule(cfg, p, model, n, path="rule"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: expected a mapping with a 'kind' field")
    kind = _get(cfg, "kind", path + ".", required=True)
    if kind == "sdp":
        return _wrap(path, SDPRule,
                     tau=float(_get(cfg, "tau", path + ".", default=1.5)),
                     q=float(_get(cfg, "q", path + ".", default=0.5)),
                     alpha0=(None if _get(cfg, "alpha0", path + ".") is None
                             else float(cfg["alpha0"])),
                     j_max=int(_get(cfg, "j_max", path + ".", default=60)))
    if kind == "a-priori":
        phi = build_phi(_get(cfg, "phi", path + ".", required=True), model, n)
        return _wrap(path, APrioriRule, p=p, phi=phi)
    raise ConfigError(f"{path}.kind: unknown rule kind {kind!r}")


def build_rate_config(cfg) -> RateStudyConfig:
    operator = build_operator(_get(cfg, "operator", "", required=True))
    model = build_model(_get(cfg, "model", "", required=True))
    n = int(_get(cfg, "n", "", required=True))
    p = float(_get(cfg, "p", "", default=2.0))
    rule = build_rule(_get(cfg, "rule", "", required=True), p, model, n)
    deltas = _get(cfg, "deltas", "", required=True)
    if not isinstance(deltas, (list, tuple)) or len(deltas) == 0:
        raise ConfigError("deltas: expected a nonempty list of noise levels")
    solver = _get(cfg, "solver", "", default={}) or {}
    profile_cfg = _get(cfg, "profile", "")
    profile = (build_profile(profile_cfg, model, n) if profile_cfg is not None else None)
    return _wrap("", RateStudyConfig,
                 operator=operator, n=n, model=model, deltas=tuple(deltas), rule=rule,
                 p=p, image_norm=Norm(_get(cfg, "image_norm", "", default="l2")),
                 repetitions=int(_get(cfg, "repetitions", "", default=5)),
                 master_seed=int(_get(cfg, "seed", "", default=0)),
                 solver_tol=float(solver.get("tol", 1e-10)),
                 solver_max_iter=int(solver.get("max_iter", 100_000)),
                 profile=profile,
                 label=str(_get(cfg, "label", "", default="study")))


def _t_grid(cfg, path="t_grid"):
    if cfg is None:
        cfg = {"log10_start": 0.0, "log10_stop": -8.0, "count": 200}
    if isinstance(cfg, (list, tuple)):
        return np.asarray([float(t) for t in cfg])
    start = float(_get(cfg, "log10_start", path + ".", default=0.0))
    stop = float(_get(cfg, "log10_stop", path + ".", default=-8.0))
    count = int(_get(cfg, "count", path + ".", default=200))
    if count < 2:
        raise ConfigError(f"{path}.count: need at least 2 points")
    return np.logspace(start, stop, count)


def _apply_overrides(cfg, pairs):
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects dotted.path=value, got {pair!r}")
        dotted, raw = pair.split("=", 1)
        keys = dotted.strip().split(".")
        node = cfg
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {dotted}: {key} is not a section")
        node[keys[-1]] = yaml.safe_load(raw)
    return cfg


def _load_config(args, allow_preset=False):
    if allow_preset and getattr(args, "preset", None):
        if args.config:
            raise ConfigError("give either --preset or --config, not both")
        cfg = preset_config(args.preset)
    elif args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
        if not isinstance(cfg, dict):
            raise ConfigError(f"{args.config}: top level must be a mapping")
    else:
        raise ConfigError("a --config file is required" +
                          (" (or --preset)" if allow_preset else ""))
    cfg = _apply_overrides(cfg, args.set)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    return cfg


def _prepare_out(args, cfg):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "effective_config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=True)
    return out


def cmd_solve(args) -> int:
    cfg = _load_config(args)
    data = _get(cfg, "data", "", required=True)
    if not isinstance(data, (list, tuple)) or len(data) == 0:
        raise ConfigError("data: expected a nonempty list of numbers")
    n = int(_get(cfg, "n", "", default=len(data)))
    if n != len(data):
        raise ConfigError(f"n: disagrees with data length ({n} vs {len(data)})")
    operator = build_operator(_get(cfg, "operator", "", required=True))
    image_norm = Norm(_get(cfg, "image_norm", "", default="l2"))
    solver = _get(cfg, "solver", "", default={}) or {}
    op = _wrap("operator", assemble, operator, n, image_norm)
    problem = _wrap("", TikhonovProblem, op=op, data=np.asarray(data, dtype=float),
                    alpha=float(_get(cfg, "alpha", "", required=True)),
                    p=float(_get(cfg, "p", "", default=2.0)),
                    elastic_eta=float(_get(cfg, "elastic_eta", "", default=0.0)))
    out = _prepare_out(args, cfg)
    x, diag = solve_tikhonov(problem, tol=float(solver.get("tol", 1e-10)),
                             max_iter=int(solver.get("max_iter", 100_000)))
    write_csv(out / "solution.csv", ["index", "value"],
              [(k + 1, float(v)) for k, v in enumerate(x)])
    write_csv(out / "diagnostics.csv",
              ["iterations", "objective", "residual", "converged",
               "certificate_violation", "method"],
              [(diag.iterations, diag.objective, diag.residual, diag.converged,
                diag.certificate_violation, diag.method)])
    print(f"solve: objective={fmt(diag.objective)} iterations={diag.iterations} "
          f"converged={diag.converged}")
    if not diag.converged:
        print("solve: iteration budget exhausted before reaching tolerance",
              file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_rates(args) -> int:
    cfg = _load_config(args, allow_preset=True)
    config = build_rate_config(cfg)
    out = _prepare_out(args, cfg)
    study = run_rate_study(config, jobs=args.jobs)
    write_records_csv(study, out / "records.csv")
    write_summary_csv(study, out / "summary.csv")
    write_plot_csv(study, out / "plotdata.csv")
    print(f"rates[{study.label}]: slope={fmt(study.slope)} stderr={fmt(study.stderr)} "
          f"predicted={fmt(study.predicted_exponent)} n_failed={study.n_failed} "
          f"records={len(study.records)} valid={study.valid}")
    if not study.valid:
        print("rates: study invalid (failed records or unusable fit)", file=sys.stderr)
        return EXIT_SDP
    return EXIT_OK


def _analyze_phi(cfg, out) -> int:
    model = build_model(_get(cfg, "model", "", required=True))
    n_max = int(_get(cfg, "n_max", "", default=1000))
    profile = build_profile({"gamma": _get(cfg, "gamma", "")}, model, n_max)
    ts = _t_grid(_get(cfg, "t_grid", ""))
    rows = []
    for t in ts:
        val = phi_eval(profile, float(t))
        rows.append((float(t), val.value, val.argmin_n))
    write_csv(out / "phi.csv", ["t", "phi", "argmin_n"], rows)
    interior = np.sort(ts[(ts > 0) & (ts < 1)])[::-1]
    if interior.size >= 4:
        slope = predicted_exponent(profile, interior)
        print(f"analyze phi: exponent={fmt(slope)} over {interior.size} grid points")
    else:
        print("analyze phi: grid too small for an exponent fit")
    return EXIT_OK


def _analyze_witness(cfg, out) -> int:
    xi = _get(cfg, "xi", "", required=True)
    mu = float(_get(cfg, "mu", "", default=0.0))
    tail = TailMode(_get(cfg, "tail", "", default="alternating"))
    truncation = int(_get(cfg, "truncation", "", default=max(len(xi) * 2, 8)))
    witness = _wrap("", property1_witness_bidiagonal, np.asarray(xi, dtype=float),
                    mu, tail, truncation)
    cert = certify_witness(witness)
    op_image = assemble(BidiagonalSum(), truncation).apply_adjoint(witness.eta)
    write_csv(out / "witness.csv", ["index", "eta", "adjoint_image"],
              [(k + 1, float(witness.eta[k]), float(op_image[k]))
               for k in range(truncation)])
    write_csv(out / "certificate.csv",
              ["head_error", "tail_max", "eta_sup", "head_exact", "tail_ok", "norm_ok"],
              [(cert.head_error, cert.tail_max, cert.eta_sup, cert.head_exact,
                cert.tail_ok, cert.norm_ok)])
    print(f"analyze witness: head_exact={cert.head_exact} tail_ok={cert.tail_ok} "
          f"norm_ok={cert.norm_ok}")
    return EXIT_OK


def _analyze_conditioning(cfg, out) -> int:
    spec = build_operator(_get(cfg, "operator", "", required=True))
    grid = _get(cfg, "n_grid", "", required=True)
    report = _wrap("n_grid", conditioning_scan, spec, grid)
    write_csv(out / "conditioning.csv", ["n", "sigma_min", "inv_sigma_min"],
              [(n, s, 1.0 / s) for n, s in zip(report.n_values, report.sigma_min)])
    write_csv(out / "verdict.csv", ["verdict", "growth_exponent"],
              [(report.verdict, report.growth_exponent)])
    print(f"analyze conditioning[{report.label}]: verdict={report.verdict} "
          f"growth_exponent={fmt(report.growth_exponent)}")
    return EXIT_OK


def _analyze_weakstar(cfg, out) -> int:
    spec = build_operator(_get(cfg, "operator", "", required=True))
    k_max = int(_get(cfg, "k_max", "", required=True))
    probe = _get(cfg, "probe", "", default="constant-one")
    if probe == "reciprocal":
        probe = 1.0 / np.arange(1, k_max + 1, dtype=float)
    elif isinstance(probe, (list, tuple)):
        probe = np.asarray(probe, dtype=float)
    pairings = _wrap("probe", weak_star_diagnostic, spec, k_max, probe)
    write_csv(out / "weakstar.csv", ["k", "pairing"],
              [(k + 1, float(v)) for k, v in enumerate(pairings)])
    print(f"analyze weakstar: last pairing = {fmt(float(pairings[-1]))}")
    return EXIT_OK


def _analyze_vsc(cfg, out) -> int:
    spec = build_operator(_get(cfg, "operator", "", required=True))
    n = int(_get(cfg, "n", "", required=True))
    image_norm = Norm(_get(cfg, "image_norm", "", default="l1"))
    model = build_model(_get(cfg, "model", "", required=True))
    profile = build_profile({"gamma": _get(cfg, "gamma", ""),
                             "n_max": _get(cfg, "n_max", "", default=n)}, model, n)
    if "beta" in cfg:
        beta = float(cfg["beta"])
    elif "mu" in cfg:
        mu = float(cfg["mu"])
        if not 0 <= mu < 1:
            raise ConfigError(f"mu: must lie in [0, 1), got {mu}")
        beta = (1.0 - mu) / (1.0 + mu)
    else:
        raise ConfigError("vsc analysis needs 'beta' or 'mu'")
    op = assemble(spec, n, image_norm)
    x_true = model.materialize(n)
    report = _wrap("", vsc_check, op, x_true, profile, beta,
                   int(_get(cfg, "samples", "", default=1000)),
                   int(_get(cfg, "seed", "", default=0)))
    write_csv(out / "vsc.csv", ["samples", "violations", "worst_margin", "beta"],
              [(report.samples, report.violations, report.worst_margin, report.beta)])
    print(f"analyze vsc: violations={report.violations}/{report.samples} "
          f"worst_margin={fmt(report.worst_margin)}")
    return EXIT_OK


def _analyze_gamma(cfg, out) -> int:
    spec = build_operator(_get(cfg, "operator", "", required=True))
    count = int(_get(cfg, "count", "", required=True))
    truncation = int(_get(cfg, "truncation", "", default=count))
    mode = GammaMode(_get(cfg, "mode", "", default="sum"))
    dual_norm = Norm(_get(cfg, "dual_norm", "", default="l2"))
    sources = _wrap("operator", standard_sources, spec, count, truncation)
    value = _wrap("", gamma_from_sources, sources, count, mode, dual_norm)
    write_csv(out / "gamma.csv", ["mode", "n", "dual_norm", "value"],
              [(mode.value, count, dual_norm.value, value)])
    print(f"analyze gamma: {mode.value} gamma_{count} = {fmt(value)}")
    return EXIT_OK


_ANALYZERS = {
    "phi": _analyze_phi,
    "witness": _analyze_witness,
    "conditioning": _analyze_conditioning,
    "weakstar": _analyze_weakstar,
    "vsc": _analyze_vsc,
    "gamma": _analyze_gamma,
}


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    out = _prepare_out(args, cfg)
    return _ANALYZERS[args.what](cfg, out)


def _add_common(parser, preset=False, jobs=False):
    parser.add_argument("--config", help="YAML configuration file")
    if preset:
        parser.add_argument("--preset", choices=sorted(PRESETS),
                            help="bundled study configuration")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's master seed")
    parser.add_argument("--set", action="append", metavar="PATH=VALUE",
                        help="override a config entry, e.g. --set rule.tau=2.0")
    if jobs:
        parser.add_argument("--jobs", type=int, default=1,
                            help="parallel workers for study records (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="l1tik",
        description="Sparsity-penalized Tikhonov regularization toolbox",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single reconstruction from a config")
    _add_common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_rates = sub.add_parser("rates", help="delta-sweep convergence-rate study")
    _add_common(p_rates, preset=True, jobs=True)
    p_rates.set_defaults(func=cmd_rates)

    p_analyze = sub.add_parser("analyze", help="diagnostics and inequality checks")
    p_analyze.add_argument("what", choices=sorted(_ANALYZERS),
                           help="which analysis to run")
    _add_common(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
