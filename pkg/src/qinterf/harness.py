"""
Seeded experiments: sample -> estimate -> count peaks -> measure.

Configs are flat ``key = value`` text.  Dotted keys nest, lists are comma
separated, and ``#`` starts a comment.  Angles may be written with ``pi``
(``pi``, ``0.5*pi``, ``-pi/2``)::

    model.cluster.0.weight = 0.5
    model.cluster.0.mean   = 0          # comma list in d > 1
    model.cluster.0.var    = 4          # isotropic; or .cov = row-major d*d list
    model.cluster.0.phase  = 0
    sampling.per_cluster   = 3000, 3000 # or sampling.n = 6000
    seed      = 0                       # base seed
    seeds     = 20                      # trial k uses seed + k (mod 2**64)
    estimator = both                    # classical | quantum | both
    alpha = 10
    hbar = 0.4
    lambda = 4                          # kernel covariance is lambda**2 * I
    phase_strategy = per_cluster        # all_zero | per_cluster | random_uniform
    phases = 0, pi                      # optional per-cluster override
    grid.intervals = 100                # grid.low / grid.high optional, per axis
    grid.margin = 3
    threshold = 0.5
    sweep.mu2 = 6, 5, 4, 2              # any of: mu2 alpha hbar lambda threshold sigma
    sweep.phase_strategy = per_cluster, random_uniform
    output = runs/fig2                  # CSV goes to <output>.csv
    dump_fields = false
    timing = false
    workers = 1

Within a trial the classical and quantum estimators see the same dataset.
Random per-point phases draw from a separate sub-stream of the trial seed.
Rows come out in trial order whatever the worker count.  ``wall_ms`` is
``NA`` unless ``timing = true``, which keeps the CSV byte-identical across
repeated runs.
"""

import csv
import io
import itertools
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .detection import count_peaks, field_entropy, field_sparsity
from .errors import ConfigError
from .estimators import (
    EvaluationGrid,
    PhaseStrategy,
    assign_phases,
    classical_density,
    default_grid,
    quantum_amplitude,
    quantum_density,
    write_field,
)
from .synthesis import (
    SEED_MASK,
    STREAM_PHASES,
    ClusterSpec,
    MixtureModel,
    derive_seed,
    sample_mixture,
    separation,
    stratified_sample,
)

__all__ = [
    "ExperimentConfig",
    "TrialResult",
    "parse_config",
    "load_config",
    "format_config",
    "preset",
    "PRESETS",
    "run_experiment",
    "trial_config",
    "results_to_csv",
    "sweep_report",
    "format_report",
]

CSV_COLUMNS = (
    "run_id", "seed", "estimator", "mu2", "delta_mu", "alpha", "hbar", "lambda",
    "phase_strategy", "threshold", "peak_count", "peak_locations", "entropy",
    "sparsity", "wall_ms",
)
SWEEPABLE = ("mu2", "alpha", "hbar", "lambda", "threshold", "sigma", "phase_strategy")
ESTIMATORS = ("classical", "quantum", "both")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    model: MixtureModel
    per_cluster: tuple | None = None
    n: int | None = None
    seed: int = 0
    seeds: int = 1
    estimator: str = "both"
    alpha: float = 10.0
    hbar: float = 0.4
    lam: float = 4.0
    phase_strategy: str = "per_cluster"
    phases: tuple | None = None
    grid_intervals: int = 100
    grid_low: tuple | None = None
    grid_high: tuple | None = None
    grid_margin: float = 3.0
    threshold: float = 0.5
    sweep: dict = field(default_factory=dict)
    output: str | None = None
    dump_fields: bool = False
    timing: bool = False
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.per_cluster is None and self.n is None:
            raise ConfigError("set sampling.per_cluster or sampling.n", "sampling")
        if self.per_cluster is not None and len(self.per_cluster) != len(self.model):
            raise ConfigError(
                f"{len(self.per_cluster)} counts for {len(self.model)} clusters",
                "sampling.per_cluster",
            )
        if self.per_cluster is not None and any(c < 1 for c in self.per_cluster):
            raise ConfigError("counts must be positive", "sampling.per_cluster")
        if self.n is not None and self.n < 1:
            raise ConfigError("must be positive", "sampling.n")
        if self.seeds < 1:
            raise ConfigError("must be at least 1", "seeds")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"expected one of {ESTIMATORS}", "estimator")
        for key, val in (("alpha", self.alpha), ("hbar", self.hbar), ("lambda", self.lam)):
            if not val > 0:
                raise ConfigError("must be positive", key)
        if self.phase_strategy not in PhaseStrategy.KINDS:
            raise ConfigError(f"expected one of {PhaseStrategy.KINDS}", "phase_strategy")
        if self.phases is not None and len(self.phases) != len(self.model):
            raise ConfigError(f"need {len(self.model)} phases", "phases")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("must lie in (0, 1)", "threshold")
        if self.grid_intervals < 2:
            raise ConfigError("must be at least 2", "grid.intervals")
        if (self.grid_low is None) != (self.grid_high is None):
            raise ConfigError("grid.low and grid.high go together", "grid.low")
        if self.grid_low is not None and len(self.grid_low) != self.model.dim:
            raise ConfigError(f"need {self.model.dim} values", "grid.low")
        if self.model.dim > 2:
            raise ConfigError("grids support d <= 2", "model")
        for key, values in self.sweep.items():
            if key not in SWEEPABLE:
                raise ConfigError(f"not a sweepable field; use one of {SWEEPABLE}", f"sweep.{key}")
            if not values:
                raise ConfigError("empty sweep axis", f"sweep.{key}")
            if key == "phase_strategy":
                bad = [v for v in values if v not in PhaseStrategy.KINDS]
                if bad:
                    raise ConfigError(f"unknown strategy {bad[0]!r}", "sweep.phase_strategy")
        if "mu2" in self.sweep and len(self.model) < 2:
            raise ConfigError("mu2 needs a second cluster", "sweep.mu2")
        if self.workers < 1:
            raise ConfigError("must be at least 1", "workers")

    @property
    def eta(self):
        return self.lam**2 * np.eye(self.model.dim)

    def with_value(self, key, value):
        """Copy with one scalar field replaced (sweep semantics)."""
        if key == "mu2":
            clusters = list(self.model.clusters)
            c = clusters[1]
            clusters[1] = ClusterSpec(c.weight, np.full(c.dim, float(value)), c.cov, c.phase)
            return replace(self, model=MixtureModel(tuple(clusters)))
        if key == "sigma":
            clusters = tuple(
                ClusterSpec(c.weight, c.mean, float(value) ** 2 * np.eye(c.dim), c.phase)
                for c in self.model.clusters
            )
            return replace(self, model=MixtureModel(clusters))
        if key == "phase_strategy":
            return replace(self, phase_strategy=value)
        attr = {"lambda": "lam"}.get(key, key)
        return replace(self, **{attr: float(value)})


@dataclass(frozen=True)
class TrialResult:
    run_id: int
    seed: int
    estimator: str
    mu2: tuple | None
    delta_mu: float | None
    alpha: float
    hbar: float
    lam: float
    phase_strategy: str
    threshold: float
    peak_count: int
    peak_locations: tuple
    entropy: float
    sparsity: float
    wall_ms: float | None
    true_k: int
    sweep: tuple = ()  # ((key, value), ...)

    @property
    def success(self):
        return self.peak_count == self.true_k

    def row(self):
        def num(v):
            return "NA" if v is None else repr(float(v))

        def coords(c):
            return " ".join(repr(float(v)) for v in c)

        return {
            "run_id": str(self.run_id),
            "seed": str(self.seed),
            "estimator": self.estimator,
            "mu2": "NA" if self.mu2 is None else coords(self.mu2),
            "delta_mu": num(self.delta_mu),
            "alpha": num(self.alpha),
            "hbar": num(self.hbar),
            "lambda": num(self.lam),
            "phase_strategy": self.phase_strategy,
            "threshold": num(self.threshold),
            "peak_count": str(self.peak_count),
            "peak_locations": ";".join(coords(c) for c in self.peak_locations),
            "entropy": num(self.entropy),
            "sparsity": num(self.sparsity),
            "wall_ms": "NA" if self.wall_ms is None else f"{self.wall_ms:.3f}",
        }


# -- config text --------------------------------------------------------------

_ANGLE = re.compile(r"^([+-]?[0-9.eE+-]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?$")


def parse_number(text, key):
    """A finite float; angles may be written with ``pi`` (``pi/2``, ``-2pi``)."""
    s = text.strip()
    try:
        value = float(s)
    except ValueError:
        m = _ANGLE.match(s)
        if not m:
            raise ConfigError(f"not a number: {text!r}", key) from None
        try:
            coef = m.group(1)
            coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
            div = float(m.group(2)) if m.group(2) else 1.0
            value = coef * math.pi / div
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"not a number: {text!r}", key) from None
    if not math.isfinite(value):
        raise ConfigError(f"not a finite number: {text!r}", key)
    return value


def _numbers(text, key):
    return tuple(parse_number(t, key) for t in text.split(",") if t.strip())


def _integer(text, key):
    v = parse_number(text, key)
    if v != int(v):
        raise ConfigError(f"not an integer: {text!r}", key)
    return int(v)


def _boolean(text, key):
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}", key)


def parse_pairs(text):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def config_from_pairs(pairs):
    clusters = {}
    kw = {}
    sweep = {}
    for key, value in pairs.items():
        parts = key.split(".")
        if parts[:2] == ["model", "cluster"] and len(parts) == 4:
            try:
                idx = int(parts[2])
            except ValueError:
                raise ConfigError("cluster index must be an integer", key) from None
            clusters.setdefault(idx, {})[parts[3]] = (key, value)
        elif key == "sweep.phase_strategy":
            sweep["phase_strategy"] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif parts[0] == "sweep" and len(parts) == 2:
            sweep[parts[1]] = _numbers(value, key)
        elif key == "sampling.per_cluster":
            kw["per_cluster"] = tuple(_integer(v, key) for v in value.split(","))
        elif key == "sampling.n":
            kw["n"] = _integer(value, key)
        elif key in ("seed", "seeds", "workers"):
            kw[key] = _integer(value, key)
        elif key in ("alpha", "hbar", "threshold"):
            kw[key] = parse_number(value, key)
        elif key == "lambda":
            kw["lam"] = parse_number(value, key)
        elif key in ("estimator", "phase_strategy"):
            kw[key] = value
        elif key == "phases":
            kw["phases"] = _numbers(value, key)
        elif key == "grid.intervals":
            kw["grid_intervals"] = _integer(value, key)
        elif key == "grid.margin":
            kw["grid_margin"] = parse_number(value, key)
        elif key in ("grid.low", "grid.high"):
            kw["grid_" + parts[1]] = _numbers(value, key)
        elif key == "output":
            kw["output"] = value or None
        elif key in ("dump_fields", "timing"):
            kw[key] = _boolean(value, key)
        else:
            raise ConfigError("unknown key", key)
    if not clusters:
        raise ConfigError("no clusters defined", "model.cluster")
    if sorted(clusters) != list(range(len(clusters))):
        raise ConfigError("cluster indices must be 0..K-1", "model.cluster")
    specs = []
    for idx in range(len(clusters)):
        c = clusters[idx]
        prefix = f"model.cluster.{idx}"
        unknown = set(c) - {"weight", "mean", "var", "cov", "phase"}
        if unknown:
            raise ConfigError("unknown key", f"{prefix}.{sorted(unknown)[0]}")
        for req in ("weight", "mean"):
            if req not in c:
                raise ConfigError("missing", f"{prefix}.{req}")
        mean = _numbers(c["mean"][1], c["mean"][0])
        d = len(mean)
        if "cov" in c:
            vals = _numbers(c["cov"][1], c["cov"][0])
            if len(vals) != d * d:
                raise ConfigError(f"need {d * d} entries", c["cov"][0])
            cov = np.array(vals).reshape(d, d)
        elif "var" in c:
            cov = parse_number(c["var"][1], c["var"][0]) * np.eye(d)
        else:
            raise ConfigError("missing (or .cov)", f"{prefix}.var")
        try:
            specs.append(ClusterSpec(
                parse_number(c["weight"][1], c["weight"][0]),
                mean,
                cov,
                parse_number(c["phase"][1], c["phase"][0]) if "phase" in c else 0.0,
            ))
        except ValueError as exc:
            raise ConfigError(str(exc), prefix) from None
    try:
        model = MixtureModel(tuple(specs))
    except ValueError as exc:
        raise ConfigError(str(exc), "model") from None
    return ExperimentConfig(model=model, sweep=sweep, **kw)


def parse_config(text, overrides=None):
    """Parse config text; ``overrides`` (a dict of key -> text) wins over the file."""
    pairs = parse_pairs(text)
    pairs.update(overrides or {})
    return config_from_pairs(pairs)


def load_config(path, overrides=None):
    with open(path) as fh:
        return parse_config(fh.read(), overrides)


def format_config(cfg):
    def nums(v):
        return ", ".join(repr(float(x)) for x in v)

    lines = []
    for i, c in enumerate(cfg.model.clusters):
        p = f"model.cluster.{i}"
        lines += [
            f"{p}.weight = {c.weight!r}",
            f"{p}.mean = {nums(c.mean)}",
            f"{p}.cov = {nums(c.cov.reshape(-1))}",
            f"{p}.phase = {c.phase!r}",
        ]
    if cfg.per_cluster is not None:
        lines.append("sampling.per_cluster = " + ", ".join(str(k) for k in cfg.per_cluster))
    else:
        lines.append(f"sampling.n = {cfg.n}")
    lines += [
        f"seed = {cfg.seed}",
        f"seeds = {cfg.seeds}",
        f"estimator = {cfg.estimator}",
        f"alpha = {cfg.alpha!r}",
        f"hbar = {cfg.hbar!r}",
        f"lambda = {cfg.lam!r}",
        f"phase_strategy = {cfg.phase_strategy}",
    ]
    if cfg.phases is not None:
        lines.append(f"phases = {nums(cfg.phases)}")
    lines.append(f"grid.intervals = {cfg.grid_intervals}")
    lines.append(f"grid.margin = {cfg.grid_margin!r}")
    if cfg.grid_low is not None:
        lines.append(f"grid.low = {nums(cfg.grid_low)}")
        lines.append(f"grid.high = {nums(cfg.grid_high)}")
    lines.append(f"threshold = {cfg.threshold!r}")
    for k, v in cfg.sweep.items():
        lines.append(f"sweep.{k} = " + (", ".join(v) if k == "phase_strategy" else nums(v)))
    if cfg.output:
        lines.append(f"output = {cfg.output}")
    lines += [
        f"dump_fields = {str(cfg.dump_fields).lower()}",
        f"timing = {str(cfg.timing).lower()}",
        f"workers = {cfg.workers}",
    ]
    return "\n".join(lines) + "\n"


_TWO_CLUSTER = """\
model.cluster.0.weight = 0.5
model.cluster.0.mean = {mu1}
model.cluster.0.var = 4
model.cluster.0.phase = 0
model.cluster.1.weight = 0.5
model.cluster.1.mean = {mu2}
model.cluster.1.var = 4
model.cluster.1.phase = pi
sampling.per_cluster = 3000, 3000
seed = 0
lambda = 4
alpha = 10
hbar = 0.4
grid.intervals = 100
threshold = 0.5
"""

def _two(mu2, mu1="0"):
    return _TWO_CLUSTER.format(mu1=mu1, mu2=mu2)


# Named reproduction configs (sigma = 2, 3000 + 3000 points, 100 intervals per axis).
# The Fig. 1 presets smooth the sampled data with the classical kernel; the
# exact 1-D curves come from ``qinterf oracle --kind classical`` with a large alpha.
PRESETS = {
    "fig1": _two(4) + "estimator = classical\nsweep.mu2 = 2, 4, 4.5, 5, 6\n",
    "fig1-2d": _two("3, 3", "0, 0") + "estimator = classical\nsweep.mu2 = 3, 5\n",
    "fig2": _two(4) + "estimator = classical\nsweep.mu2 = 6, 5, 4, 2\n",
    "fig2-alpha": _two(4) + "estimator = classical\nsweep.alpha = 1, 10, 100, 1000\n",
    "fig3-left": _two(4) + "estimator = quantum\nphase_strategy = per_cluster\n",
    "fig3-right": _two(4) + "estimator = quantum\nphase_strategy = random_uniform\n",
    "fig3-lambda": _two(4) + "estimator = quantum\nphase_strategy = per_cluster\nsweep.lambda = 2, 3, 4, 6\n",
    "fig3-phases": _two(4)
    + "estimator = quantum\nsweep.phase_strategy = per_cluster, random_uniform, all_zero\n",
    "separated": _two(20) + "estimator = both\nphase_strategy = per_cluster\n",
}


def preset(name, overrides=None):
    try:
        text = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset; choose from {sorted(PRESETS)}", "preset") from None
    return parse_config(text, overrides)


# -- running ------------------------------------------------------------------

def _trials(cfg):
    keys = list(cfg.sweep)
    run_id = 0
    for values in itertools.product(*(cfg.sweep[k] for k in keys)):
        point = cfg
        for k, v in zip(keys, values):
            point = point.with_value(k, v)
        for s in range(cfg.seeds):
            seed = (cfg.seed + s) & SEED_MASK
            yield run_id, seed, point, tuple(zip(keys, values))
            run_id += 1


def _grid(cfg, data):
    if cfg.grid_low is not None:
        return EvaluationGrid(tuple(
            (lo, hi, cfg.grid_intervals) for lo, hi in zip(cfg.grid_low, cfg.grid_high)
        ))
    return default_grid(data.points, cfg.eta, cfg.grid_intervals, cfg.grid_margin)


def _phase_strategy(cfg, seed):
    if cfg.phase_strategy == "all_zero":
        return PhaseStrategy.all_zero()
    if cfg.phase_strategy == "random_uniform":
        return PhaseStrategy.random_uniform(derive_seed(seed, STREAM_PHASES))
    values = cfg.phases if cfg.phases is not None else [c.phase for c in cfg.model.clusters]
    return PhaseStrategy.per_cluster(values)


def _run_trial(args):
    run_id, seed, cfg, sweep = args
    if cfg.per_cluster is not None:
        data = stratified_sample(cfg.model, cfg.per_cluster, seed)
    else:
        data = sample_mixture(cfg.model, cfg.n, seed)
    grid = _grid(cfg, data)
    kinds = ("classical", "quantum") if cfg.estimator == "both" else (cfg.estimator,)
    model = cfg.model
    mu2 = tuple(model.clusters[1].mean) if len(model) > 1 else None
    try:
        dmu = separation(model, 0, 1) if len(model) > 1 else None
    except ValueError:
        dmu = None
    out = []
    for kind in kinds:
        t0 = time.perf_counter()
        if kind == "classical":
            fld = classical_density(data, cfg.alpha, cfg.eta, grid)
            strategy = "none"
        else:
            strat = _phase_strategy(cfg, seed)
            phases = assign_phases(data, strat)
            fld = quantum_density(quantum_amplitude(data, cfg.hbar, cfg.eta, phases, grid))
            strategy = cfg.phase_strategy
        report = count_peaks(fld, cfg.threshold)
        ent = field_entropy(fld)
        spa = field_sparsity(fld)
        wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
        if cfg.dump_fields and cfg.output:
            write_field(fld, f"{cfg.output}.run{run_id}.{kind}.field")
        out.append(TrialResult(
            run_id=run_id, seed=seed, estimator=kind, mu2=mu2, delta_mu=dmu,
            alpha=cfg.alpha, hbar=cfg.hbar, lam=cfg.lam, phase_strategy=strategy,
            threshold=cfg.threshold, peak_count=report.count,
            peak_locations=tuple(report.locations), entropy=ent, sparsity=spa,
            wall_ms=wall, true_k=len(model), sweep=sweep,
        ))
    return out


def run_experiment(cfg, workers=None):
    """Run every (sweep point, seed) trial and return the results in trial order.

    Writes ``<output>.csv`` when ``cfg.output`` is set.
    """
    workers = cfg.workers if workers is None else workers
    trials = list(_trials(cfg))
    if workers > 1 and len(trials) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_trial, trials))
    else:
        chunks = [_run_trial(t) for t in trials]
    results = [r for chunk in chunks for r in chunk]
    if cfg.output:
        with open(f"{cfg.output}.csv", "w", newline="") as fh:
            fh.write(results_to_csv(results))
    return results


def trial_config(cfg, row):
    """Single-trial config reproducing one CSV row of a run of ``cfg``."""
    one = replace(cfg, sweep={}, seeds=1, seed=int(row["seed"]), output=None,
                  dump_fields=False, estimator=row["estimator"])
    if row["mu2"] != "NA":
        coords = [float(v) for v in row["mu2"].split()]
        clusters = list(one.model.clusters)
        c = clusters[1]
        clusters[1] = ClusterSpec(c.weight, coords, c.cov, c.phase)
        one = replace(one, model=MixtureModel(tuple(clusters)))
    for key in ("alpha", "hbar", "lambda", "threshold"):
        one = one.with_value(key, float(row[key]))
    if row["phase_strategy"] != "none":
        one = one.with_value("phase_strategy", row["phase_strategy"])
    if "sigma" in cfg.sweep:
        raise ConfigError("rows of sigma sweeps do not carry sigma; rerun from the config", "sweep.sigma")
    return one


def results_to_csv(results):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow(r.row())
    return buf.getvalue()


def sweep_report(results):
    """Per (estimator, sweep point) group: success fraction, mean entropy and sparsity.

    Success means the peak count equals the true number of clusters.  Groups
    are sorted by key, so the report ignores the order of ``results``.
    """
    if not results:
        raise ValueError("no results to summarize")
    groups = {}
    for r in results:
        groups.setdefault((r.estimator, r.sweep), []).append(r)
    summary = []
    for (est, sweep) in sorted(groups):
        rows = groups[(est, sweep)]
        wins = sum(r.success for r in rows)
        summary.append({
            "estimator": est,
            "sweep": dict(sweep),
            "trials": len(rows),
            "successes": wins,
            "success_fraction": wins / len(rows),
            "mean_entropy": math.fsum(r.entropy for r in rows) / len(rows),
            "mean_sparsity": math.fsum(r.sparsity for r in rows) / len(rows),
        })
    return summary


def _cell(v):
    return v if isinstance(v, str) else repr(v)


def format_report(summary):
    keys = sorted({k for g in summary for k in g["sweep"]})
    head = ["estimator", *keys, "trials", "successes", "success_fraction",
            "mean_entropy", "mean_sparsity"]
    lines = ["\t".join(head)]
    for g in summary:
        cells = [g["estimator"], *(_cell(g["sweep"].get(k, "NA")) for k in keys),
                 str(g["trials"]), str(g["successes"]), f"{g['success_fraction']:.3f}",
                 f"{g['mean_entropy']:.6f}", f"{g['mean_sparsity']:.6f}"]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
