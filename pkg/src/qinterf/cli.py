"""Command line entry point: ``qinterf {synth,estimate,count,run,oracle}``.

Exit status is 0 on success, 1 for configuration or input errors and 2 for
numerical degeneracy (an amplitude that cancels everywhere, failed quadrature).
"""

import argparse
import sys

import numpy as np

from . import analytic, detection, estimators, harness, synthesis
from .errors import ConfigError, NumericalError

# flag dest -> config key
_CONFIG_FLAGS = {
    "seed": "seed",
    "seeds": "seeds",
    "estimator": "estimator",
    "alpha": "alpha",
    "hbar": "hbar",
    "lam": "lambda",
    "phase_strategy": "phase_strategy",
    "phases": "phases",
    "threshold": "threshold",
    "intervals": "grid.intervals",
    "mu2": "model.cluster.1.mean",
    "workers": "workers",
    "output": "output",
}


def _add_config_flags(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="flat key = value config file")
    src.add_argument("--preset", choices=sorted(harness.PRESETS), help="named reproduction config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--seed")
    p.add_argument("--seeds")
    p.add_argument("--estimator", choices=harness.ESTIMATORS)
    p.add_argument("--alpha")
    p.add_argument("--hbar")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--phase-strategy", choices=estimators.PhaseStrategy.KINDS)
    p.add_argument("--phases", help="comma-separated per-cluster phases, e.g. 0,pi")
    p.add_argument("--threshold")
    p.add_argument("--intervals")
    p.add_argument("--mu2", help="mean of the second cluster")
    p.add_argument("--workers")


def _load_config(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "--set")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for dest, key in _CONFIG_FLAGS.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides[key] = str(val)
    if args.config:
        return harness.load_config(args.config, overrides)
    return harness.preset(args.preset or "fig3-left", overrides)


def _emit(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args):
    cfg = _load_config(args)
    if cfg.per_cluster is not None:
        data = synthesis.stratified_sample(cfg.model, cfg.per_cluster, cfg.seed)
    else:
        data = synthesis.sample_mixture(cfg.model, cfg.n, cfg.seed)
    _emit(synthesis.format_dataset(data), args.out)


def _grid_from_args(args, points, eta):
    if args.low is not None or args.high is not None:
        if args.low is None or args.high is None:
            raise ConfigError("--low and --high go together", "--low")
        lo = [float(v) for v in args.low.split(",")]
        hi = [float(v) for v in args.high.split(",")]
        if len(lo) != len(hi):
            raise ConfigError("--low and --high need the same number of axes", "--low")
        return estimators.EvaluationGrid(tuple((a, b, args.intervals) for a, b in zip(lo, hi)))
    return estimators.default_grid(points, eta, args.intervals)


def cmd_estimate(args):
    data = synthesis.read_dataset(args.dataset)
    eta = args.lam**2 * np.eye(data.dim)
    grid = _grid_from_args(args, data.points, eta)
    if args.kind == "classical":
        out = estimators.classical_density(data, args.alpha, eta, grid)
    else:
        if args.phase_strategy == "per_cluster":
            values = [harness.parse_number(v, "--phases") for v in (args.phases or "0,pi").split(",")]
            strat = estimators.PhaseStrategy.per_cluster(values)
        elif args.phase_strategy == "random_uniform":
            strat = estimators.PhaseStrategy.random_uniform(
                args.phase_seed if args.phase_seed is not None
                else synthesis.derive_seed(data.seed, synthesis.STREAM_PHASES)
            )
        else:
            strat = estimators.PhaseStrategy.all_zero()
        phases = estimators.assign_phases(data, strat)
        out = estimators.quantum_amplitude(data, args.hbar, eta, phases, grid)
        if args.kind == "quantum":
            out = estimators.quantum_density(out)
    _emit(estimators.format_field(out), args.out)


def cmd_count(args):
    fld = estimators.read_field(args.field)
    if fld.kind == "amplitude":
        fld = estimators.quantum_density(fld)
    report = detection.count_peaks(fld, args.threshold)
    _emit(detection.format_peak_report(report), args.out)


def cmd_run(args):
    cfg = _load_config(args)
    if args.dump_config:
        sys.stdout.write(harness.format_config(cfg))
        return
    results = harness.run_experiment(cfg)
    if not cfg.output:
        sys.stdout.write(harness.results_to_csv(results))
    if args.report:
        stream = sys.stdout if cfg.output else sys.stderr
        stream.write(harness.format_report(harness.sweep_report(results)))


def cmd_oracle(args):
    p = analytic.Lemma1Params(
        n1=args.n1, mu1=args.mu1, delta_mu=args.delta_mu, sigma=args.sigma,
        lam=args.lam, alpha=args.alpha, hbar=args.hbar,
        phi1=harness.parse_number(args.phi1, "--phi1"), phi2=harness.parse_number(args.phi2, "--phi2"),
    )
    if args.diagnostics:
        _emit(analytic.format_diagnostics(analytic.interference_diagnostics(p)), args.out)
        return
    pad = 6.0 * max(p.sigma, np.sqrt(p.sigma_alpha_sq), np.sqrt(p.sigma_hbar_r_sq))
    lo = args.low if args.low is not None else min(p.mu1, p.mu2) - pad
    hi = args.high if args.high is not None else max(p.mu1, p.mu2) + pad
    grid = estimators.EvaluationGrid.regular(lo, hi, args.intervals)
    if args.form == "quadrature":
        fld = analytic.quadrature_oracle(args.kind, p, grid, psi0=args.psi0)
    elif args.kind == "classical":
        fld = analytic.lemma1_classical(p, grid)
    else:
        fld = analytic.lemma1_quantum(p, grid, form=args.form)
    _emit(estimators.format_field(fld), args.out)


def build_parser():
    parser = argparse.ArgumentParser(prog="qinterf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a dataset file from a config")
    _add_config_flags(p)
    p.add_argument("--out", help="dataset path (default: stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", help="dataset file -> field file")
    p.add_argument("dataset")
    p.add_argument("--kind", choices=("classical", "quantum", "amplitude"), default="quantum")
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--hbar", type=float, default=0.4)
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--phase-strategy", choices=estimators.PhaseStrategy.KINDS, default="per_cluster")
    p.add_argument("--phases", help="per-cluster phases, default 0,pi")
    p.add_argument("--phase-seed", type=int)
    p.add_argument("--intervals", type=int, default=100)
    p.add_argument("--low", help="per-axis lower bounds, comma separated")
    p.add_argument("--high", help="per-axis upper bounds, comma separated")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("count", help="field file -> peak report")
    p.add_argument("field")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("run", help="config -> CSV of trials")
    _add_config_flags(p)
    p.add_argument("--out", dest="output", help="output prefix; CSV goes to <prefix>.csv")
    p.add_argument("--report", action="store_true", help="also print the sweep summary")
    p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="closed-form or quadrature two-cluster field")
    p.add_argument("--kind", choices=("classical", "quantum"), default="quantum")
    p.add_argument("--form", choices=("derived", "literal", "quadrature"), default="derived")
    p.add_argument("--psi0", choices=("gaussian", "sqrt"), default="gaussian")
    p.add_argument("--n1", type=float, default=0.5)
    p.add_argument("--mu1", type=float, default=0.0)
    p.add_argument("--delta-mu", type=float, default=4.0)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float, default=4.0)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--hbar", type=float, default=0.4)
    p.add_argument("--phi1", default="0")
    p.add_argument("--phi2", default="pi")
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--intervals", type=int, default=200)
    p.add_argument("--diagnostics", action="store_true", help="print key=value interference diagnostics")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"qinterf: numerical error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"qinterf: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
