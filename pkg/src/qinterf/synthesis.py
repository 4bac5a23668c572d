"""
Ground-truth Gaussian mixtures and seeded datasets.

Random streams come from numpy's Philox4x32-10, a counter-based generator.
The key is derived from ``(seed, stream)`` with :class:`numpy.random.SeedSequence`.
The same ``(model, n, seed)`` therefore always yields the same points, on
every platform numpy supports.
"""

from dataclasses import dataclass, field

import numpy as np

from .gaussian_core import as_covariance

__all__ = [
    "ClusterSpec",
    "MixtureModel",
    "Dataset",
    "make_rng",
    "derive_seed",
    "sample_mixture",
    "stratified_sample",
    "separation",
    "write_dataset",
    "read_dataset",
    "format_dataset",
    "parse_dataset",
]

TWO_PI = 2.0 * np.pi
SEED_MASK = (1 << 64) - 1

# stream ids for make_rng / derive_seed
STREAM_DATA = 0
STREAM_PHASES = 1


def make_rng(seed, stream=STREAM_DATA):
    """Philox generator keyed by ``(seed, stream)``."""
    seed = int(seed) & SEED_MASK
    ss = np.random.SeedSequence(seed, spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, stream):
    """A 64-bit seed for an independent sub-stream of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=(int(stream),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class ClusterSpec:
    weight: float
    mean: np.ndarray
    cov: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"cluster weight must be positive, got {self.weight}")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        if mean.ndim != 1 or not np.all(np.isfinite(mean)):
            raise ValueError("cluster mean must be a finite vector")
        mean.setflags(write=False)
        cov = as_covariance(self.cov, dim=mean.shape[0])
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "phase", float(self.phase) % TWO_PI)

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class MixtureModel:
    clusters: tuple

    def __post_init__(self):
        clusters = tuple(self.clusters)
        if not clusters:
            raise ValueError("mixture model needs at least one cluster")
        dims = {c.dim for c in clusters}
        if len(dims) != 1:
            raise ValueError(f"clusters have mixed dimensions {sorted(dims)}")
        total = sum(c.weight for c in clusters)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"cluster weights sum to {total!r}, expected 1")
        object.__setattr__(self, "clusters", clusters)

    @property
    def dim(self):
        return self.clusters[0].dim

    @property
    def weights(self):
        return np.array([c.weight for c in self.clusters])

    def __len__(self):
        return len(self.clusters)

    @classmethod
    def two_cluster_1d(cls, mu1=0.0, mu2=4.0, sigma=2.0, n1=0.5, phases=(0.0, np.pi)):
        """The two-cluster 1-D setup used throughout the experiments."""
        var = sigma * sigma
        return cls((
            ClusterSpec(n1, [mu1], [[var]], phases[0]),
            ClusterSpec(1.0 - n1, [mu2], [[var]], phases[1]),
        ))


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    seed: int = 0
    model: MixtureModel | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("dataset needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset has non-finite coordinates")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64).copy()
            if lab.shape != (pts.shape[0],):
                raise ValueError("labels must have one entry per point")
            if np.any(lab < 0):
                raise ValueError("labels must be nonnegative")
            if self.model is not None and np.any(lab >= len(self.model)):
                raise ValueError("label refers to a cluster not in the model")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "seed", int(self.seed) & SEED_MASK)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n


def _draw(rng, cluster, count):
    chol = np.linalg.cholesky(cluster.cov)
    z = rng.standard_normal((count, cluster.dim))
    return cluster.mean + z @ chol.T


def sample_mixture(model, n, seed):
    """Draw ``n`` i.i.d. points: a label from the weights, then a Gaussian draw."""
    if int(n) < 1:
        raise ValueError(f"n must be positive, got {n}")
    n = int(n)
    rng = make_rng(seed)
    labels = rng.choice(len(model), size=n, p=model.weights)
    z = rng.standard_normal((n, model.dim))
    points = np.empty((n, model.dim))
    for k, cluster in enumerate(model.clusters):
        sel = labels == k
        chol = np.linalg.cholesky(cluster.cov)
        points[sel] = cluster.mean + z[sel] @ chol.T
    return Dataset(points, labels, seed, model)


def stratified_sample(model, per_cluster, seed):
    """Exactly ``per_cluster[k]`` points from cluster ``k``, in cluster order."""
    counts = [int(c) for c in per_cluster]
    if len(counts) != len(model):
        raise ValueError(
            f"per_cluster has {len(counts)} entries, model has {len(model)} clusters"
        )
    if any(c < 1 for c in counts):
        raise ValueError(f"per-cluster counts must be positive, got {counts}")
    rng = make_rng(seed)
    points = np.concatenate([_draw(rng, c, k) for c, k in zip(model.clusters, counts)])
    labels = np.repeat(np.arange(len(counts)), counts)
    return Dataset(points, labels, seed, model)


def separation(model, i, j):
    """Unit-less separation ``|mu_j - mu_i| / (2 sqrt(det Sigma))``.

    Only defined for clusters sharing one covariance.  In more than one
    dimension ``sqrt(det Sigma)`` is not a length, so the value is only
    comparable between models of the same dimension.
    """
    a, b = model.clusters[i], model.clusters[j]
    if not np.allclose(a.cov, b.cov, rtol=1e-12, atol=0.0):
        raise ValueError("separation is only defined for clusters sharing a covariance")
    dist = np.linalg.norm(b.mean - a.mean)
    return float(dist / (2.0 * np.sqrt(np.linalg.det(a.cov))))


def format_dataset(data):
    lines = [f"# qinterf-dataset v1 dim={data.dim} n={data.n} seed={data.seed}"]
    for k, row in enumerate(data.points):
        cols = [repr(float(v)) for v in row]
        if data.labels is not None:
            cols.append(str(int(data.labels[k])))
        lines.append("\t".join(cols))
    return "\n".join(lines) + "\n"


def parse_dataset(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# qinterf-dataset v1"):
        raise ValueError("missing '# qinterf-dataset v1' header")
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[3:])
    dim, n, seed = int(meta["dim"]), int(meta["n"]), int(meta["seed"])
    rows = [ln.split("\t") for ln in lines[1:] if not ln.startswith("#")]
    if len(rows) != n:
        raise ValueError(f"header says n={n}, found {len(rows)} rows")
    widths = {len(r) for r in rows}
    if widths == {dim}:
        labels = None
        points = np.array([[float(v) for v in r] for r in rows]).reshape(n, dim)
    elif widths == {dim + 1}:
        labels = [int(r[-1]) for r in rows]
        points = np.array([[float(v) for v in r[:-1]] for r in rows]).reshape(n, dim)
    else:
        raise ValueError(f"rows must have {dim} or {dim + 1} columns")
    return Dataset(points, labels, seed)


def write_dataset(data, path):
    with open(path, "w") as fh:
        fh.write(format_dataset(data))


def read_dataset(path):
    with open(path) as fh:
        return parse_dataset(fh.read())
