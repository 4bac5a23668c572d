"""
Empirical classical densities and interfering quantum amplitudes on grids.

Every field lives on an :class:`EvaluationGrid` of one or two axes. Grid
integrals use trapezoid node weights, so ``DensityField.integral()`` is
``sum(values * grid.weights)``.  Normalization constants are never computed
analytically; each field is rescaled so its grid integral is one.

Kernel sums run over the dataset in index order.  The node-by-point matrix is
reduced along its contiguous axis, so numpy uses pairwise summation and
permuting the points only changes results at rounding level.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateFieldError
from .gaussian_core import as_covariance
from .synthesis import TWO_PI, make_rng

__all__ = [
    "EvaluationGrid",
    "DensityField",
    "AmplitudeField",
    "PhaseStrategy",
    "PhaseAssignment",
    "default_grid",
    "assign_phases",
    "classical_density",
    "quantum_amplitude",
    "quantum_density",
    "quantum_density_pairwise",
    "interference_sum",
    "format_field",
    "parse_field",
    "write_field",
    "read_field",
]

PAIRWISE_CAP = 500
DEGENERATE_RTOL = 1e-14
# node-chunk size is chosen so one block holds at most this many kernel terms
_BLOCK = 1 << 21


@dataclass(frozen=True)
class EvaluationGrid:
    """Regular grid; ``axes`` holds one ``(low, high, intervals)`` per axis."""

    axes: tuple

    def __post_init__(self):
        axes = tuple((float(lo), float(hi), int(k)) for lo, hi, k in self.axes)
        if len(axes) not in (1, 2):
            raise ValueError(f"grids support 1 or 2 axes, got {len(axes)}")
        for lo, hi, k in axes:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"grid axis needs finite low < high, got ({lo}, {hi})")
            if k < 2:
                raise ValueError(f"grid axis needs at least 2 intervals, got {k}")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def regular(cls, low, high, intervals=100):
        return cls(((low, high, intervals),))

    @property
    def dim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(k + 1 for _, _, k in self.axes)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        return tuple((hi - lo) / k for lo, hi, k in self.axes)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def coords(self, axis=0):
        lo, hi, k = self.axes[axis]
        return np.linspace(lo, hi, k + 1)

    @property
    def nodes(self):
        """Node coordinates, shape ``(size, dim)``, row-major (last axis fastest)."""
        mesh = np.meshgrid(*[self.coords(a) for a in range(self.dim)], indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @property
    def weights(self):
        """Trapezoid quadrature weights per node."""
        w = np.ones(self.shape)
        for a in range(self.dim):
            edge = [slice(None)] * self.dim
            for end in (0, -1):
                edge[a] = end
                w[tuple(edge)] *= 0.5
        return w.reshape(-1) * self.cell_volume

    def translated(self, offset):
        offset = np.broadcast_to(np.asarray(offset, dtype=float), (self.dim,))
        return EvaluationGrid(
            tuple((lo + o, hi + o, k) for (lo, hi, k), o in zip(self.axes, offset))
        )


def default_grid(points, eta, intervals=100, margin=3.0):
    """Data range padded by ``margin`` kernel standard deviations on each axis."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    eta = as_covariance(eta, dim=pts.shape[1])
    pad = margin * np.sqrt(np.linalg.eigvalsh(eta)[-1])
    lo = pts.min(axis=0) - pad
    hi = pts.max(axis=0) + pad
    return EvaluationGrid(tuple((a, b, intervals) for a, b in zip(lo, hi)))


def _check_normalizable(total, what):
    if not np.isfinite(total) or total <= 0:
        raise DegenerateFieldError(f"{what} has no mass on the grid (integral {total!r})")


@dataclass(frozen=True, eq=False)
class DensityField:
    grid: EvaluationGrid
    values: np.ndarray
    kind: str = "classical"
    clamp_mass: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.grid.size:
            raise ValueError(f"field has {v.shape[0]} values for {self.grid.size} nodes")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def integral(self):
        return float(np.dot(self.values, self.grid.weights))

    def as_array(self):
        return self.values.reshape(self.grid.shape)

    @classmethod
    def normalized(cls, grid, raw, kind="classical", clamp_mass=0.0):
        raw = np.asarray(raw, dtype=float).reshape(-1)
        total = float(np.dot(raw, grid.weights))
        _check_normalizable(total, f"{kind} density")
        return cls(grid, raw / total, kind, clamp_mass)


@dataclass(frozen=True, eq=False)
class AmplitudeField:
    grid: EvaluationGrid
    values: np.ndarray

    kind = "amplitude"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).reshape(-1)
        if v.shape[0] != self.grid.size:
            raise ValueError(f"field has {v.shape[0]} values for {self.grid.size} nodes")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm2(self):
        return float(np.dot(np.abs(self.values) ** 2, self.grid.weights))

    def as_array(self):
        return self.values.reshape(self.grid.shape)


@dataclass(frozen=True)
class PhaseStrategy:
    """How phases are attached to data points.

    ``kind`` is ``all_zero``, ``per_cluster`` (``values`` holds one phase per
    cluster label) or ``random_uniform`` (i.i.d. uniform on [0, 2 pi) from
    ``seed``).
    """

    kind: str
    values: tuple | None = None
    seed: int | None = None

    KINDS = ("all_zero", "per_cluster", "random_uniform")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown phase strategy {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "per_cluster":
            if not self.values:
                raise ValueError("per_cluster strategy needs one phase per cluster")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind == "random_uniform":
            if self.seed is None:
                raise ValueError("random_uniform strategy needs a seed")
            object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def all_zero(cls):
        return cls("all_zero")

    @classmethod
    def per_cluster(cls, phases):
        return cls("per_cluster", tuple(phases))

    @classmethod
    def random_uniform(cls, seed):
        return cls("random_uniform", seed=seed)


@dataclass(frozen=True, eq=False)
class PhaseAssignment:
    strategy: PhaseStrategy
    phases: np.ndarray

    def __len__(self):
        return self.phases.shape[0]


def assign_phases(data, strategy):
    """One phase per data point, reduced modulo 2 pi."""
    n = data.n
    if strategy.kind == "all_zero":
        phases = np.zeros(n)
    elif strategy.kind == "per_cluster":
        if data.labels is None:
            raise ValueError("per_cluster phases need a labelled dataset")
        table = np.asarray(strategy.values)
        if data.labels.max() >= table.shape[0]:
            raise ValueError(
                f"label {int(data.labels.max())} has no phase; got {table.shape[0]} phases"
            )
        phases = table[data.labels]
    else:
        phases = make_rng(strategy.seed).uniform(0.0, TWO_PI, size=n)
    phases = np.mod(phases, TWO_PI)
    phases.setflags(write=False)
    return PhaseAssignment(strategy, phases)


def _whiten(points, nodes, cov):
    chol = linalg.cholesky(cov, lower=True)
    wp = linalg.solve_triangular(chol, points.T, lower=True).T
    wn = linalg.solve_triangular(chol, nodes.T, lower=True).T
    return wp, wn, 2.0 * np.sum(np.log(np.diag(chol)))


def _node_blocks(n_nodes, n_points):
    step = max(1, _BLOCK // max(1, n_points))
    for start in range(0, n_nodes, step):
        yield slice(start, min(n_nodes, start + step))


def _sq_dist(wn_block, wp):
    # (nodes, points), points along the contiguous axis
    diff = wn_block[:, None, :] - wp[None, :, :]
    return np.einsum("mnd,mnd->mn", diff, diff)


def _check_inputs(data, grid, eta):
    if data.dim != grid.dim:
        raise ValueError(f"data has dimension {data.dim}, grid {grid.dim}")
    return as_covariance(eta, dim=data.dim)


def classical_density(data, alpha, eta, grid):
    """Normalized ``sum_i G_{eta/alpha}(x_i - y)`` over grid nodes ``y``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    eta = _check_inputs(data, grid, eta)
    wp, wn, _ = _whiten(data.points, grid.nodes, eta / alpha)
    raw = np.empty(grid.size)
    for blk in _node_blocks(grid.size, data.n):
        raw[blk] = np.exp(-0.5 * _sq_dist(wn[blk], wp)).sum(axis=1)
    return DensityField.normalized(grid, raw, "classical")


def _unit_amplitude(data, hbar, eta, phases, grid):
    """``sum_i exp(i A(x_i, y) / hbar + i phi_i)`` per node (kernel constant dropped)."""
    if not hbar > 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    eta = _check_inputs(data, grid, eta)
    ph = np.asarray(phases.phases if isinstance(phases, PhaseAssignment) else phases, dtype=float)
    if ph.shape != (data.n,):
        raise ValueError(f"got {ph.shape[0] if ph.ndim else 0} phases for {data.n} points")
    wp, wn, _ = _whiten(data.points, grid.nodes, eta)
    raw = np.empty(grid.size, dtype=complex)
    for blk in _node_blocks(grid.size, data.n):
        theta = _sq_dist(wn[blk], wp) / (2.0 * hbar) + ph
        raw[blk] = np.cos(theta).sum(axis=1) + 1j * np.sin(theta).sum(axis=1)
    return raw, eta


def quantum_amplitude(data, hbar, eta, phases, grid):
    """Normalized ``psi(y) ~ sum_i G_{i hbar eta}(x_i - y) exp(i phi_i)``.

    Each kernel ``G_{i hbar eta}(u)`` is a constant times ``exp(i A / hbar)``,
    so the sum is linear in the number of points per node.  Raises
    :class:`DegenerateFieldError` when the contributions cancel to below
    ``1e-14`` of their triangle-inequality bound.
    """
    raw, eta = _unit_amplitude(data, hbar, eta, phases, grid)
    const = complex(np.linalg.det(2.0 * np.pi * 1j * hbar * eta)) ** -0.5
    raw = const * raw
    norm2 = float(np.dot(np.abs(raw) ** 2, grid.weights))
    bound = data.n * abs(const) * np.sqrt(np.sum(grid.weights))
    if not np.sqrt(norm2) > DEGENERATE_RTOL * bound:
        raise DegenerateFieldError(
            "quantum amplitude cancels on the whole grid; phases give total destructive interference"
        )
    return AmplitudeField(grid, raw / np.sqrt(norm2))


def quantum_density(amp):
    """``|psi|^2``, renormalized on the grid against rounding drift."""
    return DensityField.normalized(amp.grid, np.abs(amp.values) ** 2, "quantum")


def interference_sum(data, hbar, eta, phases, nodes):
    """Pairwise form ``sum_i [1 + 2 sum_{j>i} cos(phi_ij(y) + phi_i - phi_j)]``.

    ``phi_ij(y) = -(x_i - x_j)^T (hbar eta)^-1 y
    + 0.5 (x_i^T (hbar eta)^-1 x_i - x_j^T (hbar eta)^-1 x_j)`` is the action
    difference over ``hbar``; it is linear in ``y``.  Returns unnormalized
    values at ``nodes`` (shape ``(m, d)``).  Cost is quadratic in the number
    of points.
    """
    if not hbar > 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    x = data.points
    eta = as_covariance(eta, dim=data.dim)
    nodes = np.asarray(nodes, dtype=float).reshape(-1, data.dim)
    ph = np.asarray(phases.phases if isinstance(phases, PhaseAssignment) else phases, dtype=float)
    if ph.shape != (data.n,):
        raise ValueError(f"got {ph.shape[0] if ph.ndim else 0} phases for {data.n} points")
    prec = np.linalg.inv(hbar * eta)
    xp = x @ prec
    quad = np.einsum("nd,nd->n", xp, x)
    i, j = np.triu_indices(data.n, k=1)
    slope = xp[i] - xp[j]
    offset = 0.5 * (quad[i] - quad[j]) + (ph[i] - ph[j])
    out = np.full(nodes.shape[0], float(data.n))
    for blk in _node_blocks(nodes.shape[0], i.shape[0]):
        arg = offset - nodes[blk] @ slope.T
        out[blk] += 2.0 * np.cos(arg).sum(axis=1)
    return out


def quantum_density_pairwise(data, hbar, eta, phases, grid, cap=PAIRWISE_CAP):
    """Quantum density from the explicit cosine double sum (verification route)."""
    if data.n > cap:
        raise ValueError(f"pairwise form is capped at {cap} points, got {data.n}")
    _check_inputs(data, grid, eta)
    raw = interference_sum(data, hbar, eta, phases, grid.nodes)
    # rounding can leave tiny negatives where the density vanishes
    scale = np.max(np.abs(raw))
    raw = np.where(raw < 0, np.where(raw > -1e-9 * scale, 0.0, raw), raw)
    if np.any(raw < 0):
        raise DegenerateFieldError("pairwise cosine sum went negative beyond rounding")
    return DensityField.normalized(grid, raw, "quantum")


# -- field files --------------------------------------------------------------

def format_field(field):
    kind = field.kind
    if kind not in ("classical", "quantum", "amplitude"):
        raise ValueError(f"field kind {kind!r} cannot be written")
    lines = [f"# qinterf-field v1 kind={kind} dim={field.grid.dim}"]
    nodes = field.grid.nodes
    for k in range(field.grid.size):
        cols = [repr(float(c)) for c in nodes[k]]
        v = field.values[k]
        if kind == "amplitude":
            cols += [repr(float(v.real)), repr(float(v.imag))]
        else:
            cols.append(repr(float(v)))
        lines.append("\t".join(cols))
    return "\n".join(lines) + "\n"


def parse_field(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# qinterf-field v1"):
        raise ValueError("missing '# qinterf-field v1' header")
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[3:])
    kind, dim = meta["kind"], int(meta["dim"])
    rows = np.array([[float(v) for v in ln.split("\t")] for ln in lines[1:] if not ln.startswith("#")])
    width = dim + (2 if kind == "amplitude" else 1)
    if rows.ndim != 2 or rows.shape[1] != width:
        raise ValueError(f"field rows must have {width} columns")
    axes = []
    for a in range(dim):
        u = np.unique(rows[:, a])
        axes.append((u[0], u[-1], len(u) - 1))
    grid = EvaluationGrid(tuple(axes))
    if grid.size != rows.shape[0]:
        raise ValueError("field rows do not form a full grid")
    if not np.allclose(grid.nodes, rows[:, :dim], rtol=0, atol=1e-9 * max(1.0, np.abs(rows[:, :dim]).max())):
        raise ValueError("field rows are not a regular grid in row-major order")
    if kind == "amplitude":
        return AmplitudeField(grid, rows[:, dim] + 1j * rows[:, dim + 1])
    return DensityField(grid, rows[:, dim], kind)


def write_field(field, path):
    with open(path, "w") as fh:
        fh.write(format_field(field))


def read_field(path):
    with open(path) as fh:
        return parse_field(fh.read())
