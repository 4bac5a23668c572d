"""
Closed-form densities for known Gaussian mixtures, and a quadrature oracle.

Two clusters in 1-D with shared variance ``sigma**2`` are propagated by a
Gaussian kernel of variance ``lam**2``.  The classical route smooths every
component to variance ``sigma**2 + lam**2 / alpha``.  On the quantum route
each component's amplitude becomes a complex Gaussian of variance
``sigma**2 + 1j * hbar * lam**2``.  Its squared modulus has real variance
``sigma**2 / 2 + (hbar * lam**2)**2 / (2 * sigma**2)``, and the two
amplitudes interfere through a cross term centred between the clusters.

:func:`lemma1_quantum` builds the three terms from exact complex-Gaussian
products (``form="derived"``).  ``form="literal"`` keeps the frequently quoted
display instead.  That display has a constant cosine argument
``-dmu**2 / (2 hbar lam**2) + (phi1 - phi2)`` and an envelope
``G_{sqrt(2) sigma}(dmu)``.  It does not agree with the propagated amplitude
and is kept only for comparison.
:func:`quadrature_oracle` integrates the defining propagation integrals
directly and is the reference both forms are checked against.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DegenerateFieldError, QuadratureError
from .estimators import DensityField
from .gaussian_core import (
    ComplexGaussian,
    as_covariance,
    gaussian_convolution,
    gaussian_pdf,
    gaussian_product,
)

log = logging.getLogger(__name__)

__all__ = [
    "Lemma1Params",
    "InterferenceDiagnostics",
    "lemma1_classical",
    "lemma1_amplitudes",
    "lemma1_quantum",
    "interference_diagnostics",
    "format_diagnostics",
    "multi_cluster_classical",
    "multi_cluster_amplitudes",
    "multi_cluster_quantum",
    "quadrature_oracle",
    "wrap_phase",
]

CLAMP_WARN = 1e-6
SIGN_ATOL = 1e-12
QUAD_TOL = 1e-10
# surviving mass below this fraction of the direct-term mass counts as cancellation
DEGENERATE_RTOL = 1e-9


def wrap_phase(x):
    """Map an angle to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


@dataclass(frozen=True)
class Lemma1Params:
    n1: float
    mu1: float
    delta_mu: float
    sigma: float
    lam: float
    alpha: float
    hbar: float
    phi1: float = 0.0
    phi2: float = np.pi

    def __post_init__(self):
        if not 0.0 < self.n1 < 1.0:
            raise ValueError(f"n1 must lie in (0, 1), got {self.n1}")
        for name in ("sigma", "lam", "alpha", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("mu1", "delta_mu", "phi1", "phi2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @classmethod
    def figure3(cls, **overrides):
        """sigma=2, lam=4, dmu=4, n1=1/2, hbar=0.4, alpha=10, phases (0, pi)."""
        base = dict(n1=0.5, mu1=0.0, delta_mu=4.0, sigma=2.0, lam=4.0,
                    alpha=10.0, hbar=0.4, phi1=0.0, phi2=np.pi)
        base.update(overrides)
        return cls(**base)

    @property
    def mu2(self):
        return self.mu1 + self.delta_mu

    @property
    def n2(self):
        return 1.0 - self.n1

    @property
    def delta_phi(self):
        return self.phi1 - self.phi2

    @property
    def sigma_alpha_sq(self):
        return self.sigma**2 + self.lam**2 / self.alpha

    @property
    def sigma_ihbar_sq(self):
        return complex(self.sigma**2, self.hbar * self.lam**2)

    @property
    def sigma_hbar_r_sq(self):
        return self.sigma**2 / 2.0 + (self.hbar * self.lam**2) ** 2 / (2.0 * self.sigma**2)


def _nodes_1d(grid):
    if grid.dim != 1:
        raise ValueError("two-cluster closed forms are one-dimensional")
    return grid.coords(0)


def lemma1_classical(p, grid):
    y = _nodes_1d(grid)
    var = p.sigma_alpha_sq
    raw = p.n1 * gaussian_pdf(y, p.mu1, var) + p.n2 * gaussian_pdf(y, p.mu2, var)
    return DensityField.normalized(grid, raw, "classical")


def lemma1_amplitudes(p):
    """Propagated amplitude components ``sqrt(n_k) e^{i phi_k} G_{sigma^2 + i hbar lam^2}``."""
    kernel = ComplexGaussian([0.0], [[1j * p.hbar * p.lam**2]])
    comps = []
    for w, mu, phi in ((p.n1, p.mu1, p.phi1), (p.n2, p.mu2, p.phi2)):
        data = ComplexGaussian.real([mu], [[p.sigma**2]], np.sqrt(w) * np.exp(1j * phi))
        comps.append(gaussian_convolution(data, kernel))
    return comps


def _clamped(raw, grid, where):
    neg = np.minimum(raw, 0.0)
    if not np.any(neg):
        return raw, 0.0
    pos = np.maximum(raw, 0.0)
    mass = float(-np.dot(neg, grid.weights) / np.dot(pos, grid.weights))
    if mass > CLAMP_WARN:
        log.warning("%s: clamped negative mass %.3g; closed form outside its validity range", where, mass)
    return pos, mass


def _pair_density(comps, y, grid, where):
    """``|sum_k g_k(y)|^2`` assembled from products ``g_i conj(g_j)``.

    Raises :class:`DegenerateFieldError` when the cross terms cancel the
    direct terms down to rounding level everywhere on the grid.
    """
    pts = np.asarray(y, dtype=float)
    direct = np.zeros(pts.shape[0])
    cross = np.zeros(pts.shape[0])
    for i, gi in enumerate(comps):
        direct += gaussian_product(gi, gi.conj())(pts).real
        for gj in comps[i + 1:]:
            cross += 2.0 * gaussian_product(gi, gj.conj())(pts).real
    total = direct + cross
    scale = float(np.dot(direct, grid.weights))
    if not np.dot(np.maximum(total, 0.0), grid.weights) > DEGENERATE_RTOL * scale:
        raise DegenerateFieldError(f"{where}: amplitudes cancel on the whole grid")
    return total


def lemma1_quantum(p, grid, form="derived"):
    """Grid-normalized quantum density of the two-cluster model.

    ``form="derived"``: direct terms of variance ``sigma_hbar_r_sq`` plus the
    exact cross term ``2 sqrt(n1 n2) Re(g1 conj(g2))``.  The cross term is a
    Gaussian of the same variance centred at ``mu1 + dmu/2``, modulated by a
    cosine that is linear in ``y``.
    ``form="literal"``: the literal display with constant cosine and envelope.
    Negative raw values are clamped to zero and reported as ``clamp_mass``.
    """
    y = _nodes_1d(grid)
    if form == "derived":
        raw = _pair_density(lemma1_amplitudes(p), y, grid, "lemma1_quantum")
    elif form == "literal":
        var = p.sigma_hbar_r_sq
        diag = interference_diagnostics(p)
        mid = p.mu1 + p.delta_mu / 2.0
        raw = (
            p.n1 * gaussian_pdf(y, p.mu1, var)
            + p.n2 * gaussian_pdf(y, p.mu2, var)
            + 2.0 * np.sqrt(p.n1 * p.n2) * gaussian_pdf(y, mid, var) * diag.envelope * diag.cosine
        )
    else:
        raise ValueError(f"unknown form {form!r}")
    raw, mass = _clamped(raw, grid, f"lemma1_quantum[{form}]")
    return DensityField.normalized(grid, raw, "quantum", mass)


@dataclass(frozen=True)
class InterferenceDiagnostics:
    phase_arg: float
    cosine: float
    envelope: float
    envelope_ratio: float
    term_sign: str
    window_holds: bool
    on_boundary: bool
    hbar_threshold_pi: float
    hbar_threshold_2pi: float
    hbar: float

    @property
    def above_threshold_pi(self):
        return self.hbar > self.hbar_threshold_pi

    @property
    def above_threshold_2pi(self):
        return self.hbar > self.hbar_threshold_2pi


def interference_diagnostics(p):
    """Sign and size of the two-cluster interference term.

    The window ``pi >= |phase_arg| > pi/2`` makes the cosine negative.  With
    ``phi1 - phi2 = pi`` it holds iff ``hbar > dmu**2 / (pi lam**2)``.  The
    looser ``dmu**2 / (2 pi lam**2)`` bound is also reported.
    """
    raw = -p.delta_mu**2 / (2.0 * p.hbar * p.lam**2) + p.delta_phi
    arg = float(wrap_phase(raw))
    cos = float(np.cos(arg))
    if abs(cos) <= SIGN_ATOL:
        sign = "zero"
    else:
        sign = "negative" if cos < 0 else "positive"
    boundary = abs(abs(arg) - np.pi / 2.0) <= SIGN_ATOL * max(1.0, abs(raw))
    envelope = gaussian_pdf(p.delta_mu, 0.0, 2.0 * p.sigma**2)
    return InterferenceDiagnostics(
        phase_arg=arg,
        cosine=cos,
        envelope=envelope,
        envelope_ratio=float(np.exp(-p.delta_mu**2 / (4.0 * p.sigma**2))),
        term_sign=sign,
        window_holds=bool(abs(arg) > np.pi / 2.0 and not boundary),
        on_boundary=bool(boundary),
        hbar_threshold_pi=p.delta_mu**2 / (np.pi * p.lam**2),
        hbar_threshold_2pi=p.delta_mu**2 / (2.0 * np.pi * p.lam**2),
        hbar=p.hbar,
    )


def format_diagnostics(d):
    rows = [
        ("phase_arg", repr(d.phase_arg)),
        ("cosine", repr(d.cosine)),
        ("envelope", repr(d.envelope)),
        ("envelope_ratio", repr(d.envelope_ratio)),
        ("term_sign", d.term_sign),
        ("window_holds", str(d.window_holds).lower()),
        ("on_boundary", str(d.on_boundary).lower()),
        ("hbar", repr(d.hbar)),
        ("hbar_threshold_pi", repr(d.hbar_threshold_pi)),
        ("hbar_threshold_2pi", repr(d.hbar_threshold_2pi)),
        ("above_threshold_pi", str(d.above_threshold_pi).lower()),
        ("above_threshold_2pi", str(d.above_threshold_2pi).lower()),
    ]
    return "".join(f"{k}={v}\n" for k, v in rows)


def _check_model_grid(model, grid):
    if model.dim != grid.dim:
        raise ValueError(f"model has dimension {model.dim}, grid {grid.dim}")


def multi_cluster_classical(model, alpha, eta, grid):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_model_grid(model, grid)
    eta = as_covariance(eta, dim=model.dim)
    nodes = grid.nodes
    raw = np.zeros(grid.size)
    for c in model.clusters:
        raw += c.weight * gaussian_pdf(nodes, c.mean, c.cov + eta / alpha)
    return DensityField.normalized(grid, raw, "classical")


def multi_cluster_amplitudes(model, hbar, eta):
    """One propagated complex Gaussian per cluster, covariance ``Sigma_i + i hbar eta``."""
    if not hbar > 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    eta = as_covariance(eta, dim=model.dim)
    kernel = ComplexGaussian(np.zeros(model.dim), 1j * hbar * eta)
    return [
        gaussian_convolution(
            ComplexGaussian.real(c.mean, c.cov, np.sqrt(c.weight) * np.exp(1j * c.phase)),
            kernel,
        )
        for c in model.clusters
    ]


def multi_cluster_quantum(model, hbar, eta, grid):
    """Squared modulus of the K-cluster amplitude, pair terms from Gaussian products."""
    _check_model_grid(model, grid)
    comps = multi_cluster_amplitudes(model, hbar, eta)
    raw = _pair_density(comps, grid.nodes, grid, "multi_cluster_quantum")
    raw, mass = _clamped(raw, grid, "multi_cluster_quantum")
    return DensityField.normalized(grid, raw, "quantum", mass)


# -- quadrature oracle ----------------------------------------------------------

def _quad_vec(f, lo, hi, points, what):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err, info = integrate.quad_vec(
                f, lo, hi, epsabs=QUAD_TOL, epsrel=QUAD_TOL, norm="max",
                points=points, limit=20000, full_output=True,
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"{what}: {exc}") from exc
    if not info.success or err > QUAD_TOL * max(1.0, np.max(np.abs(val))):
        raise QuadratureError(f"{what}: quadrature did not converge (error estimate {err:.3g})")
    return val


def _classical_node(y, p, comps):
    kern_sd = p.lam / np.sqrt(p.alpha)
    total = 0.0
    for w, mu in comps:
        lo = max(mu - 12.0 * p.sigma, y - 12.0 * kern_sd)
        hi = min(mu + 12.0 * p.sigma, y + 12.0 * kern_sd)
        if lo >= hi:
            continue

        def f(x, mu=mu):
            return np.exp(-p.alpha * 0.5 * (x - y) ** 2 / p.lam**2) * gaussian_pdf(x, mu, p.sigma**2)

        brk = [v for v in (mu, y) if lo < v < hi]
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(f, lo, hi, points=brk or None,
                                          epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=500)
            except integrate.IntegrationWarning as exc:
                raise QuadratureError(f"classical oracle at y={y}: {exc}") from exc
        total += w * val
    return total


def quadrature_oracle(kind, p, grid, psi0="gaussian"):
    """Density from direct numerical integration of the propagation integrals.

    classical: ``int exp(-alpha A(x, y)) P0(x) dx`` with ``P0`` the two-cluster
    mixture.  quantum: ``|int exp(i A(x, y) / hbar) psi0(x) dx|^2`` with
    ``psi0 = sum_k sqrt(n_k) a_k(x) e^{i phi_k}``.  ``psi0="gaussian"`` takes
    ``a_k = G_sigma(x - mu_k)``, which is the amplitude whose propagation has
    variance ``sigma**2 + i hbar lam**2``.  ``psi0="sqrt"`` takes
    ``a_k = sqrt(G_sigma(x - mu_k))``, which is proportional to a Gaussian of
    doubled variance.  Per-node absolute tolerance is 1e-10; failure to
    converge raises :class:`QuadratureError`.
    """
    y = _nodes_1d(grid)
    if kind == "classical":
        comps = ((p.n1, p.mu1), (p.n2, p.mu2))
        raw = np.array([_classical_node(v, p, comps) for v in y])
        return DensityField.normalized(grid, raw, "classical")
    if kind != "quantum":
        raise ValueError(f"unknown oracle kind {kind!r}")
    if psi0 == "gaussian":
        sd = p.sigma

        def amp(x, mu):
            return gaussian_pdf(x, mu, p.sigma**2)
    elif psi0 == "sqrt":
        sd = np.sqrt(2.0) * p.sigma

        def amp(x, mu):
            return np.sqrt(gaussian_pdf(x, mu, p.sigma**2))
    else:
        raise ValueError(f"unknown psi0 {psi0!r}")
    hl2 = p.hbar * p.lam**2
    psi = np.zeros(y.shape[0], dtype=complex)
    for w, mu, phi in ((p.n1, p.mu1, p.phi1), (p.n2, p.mu2, p.phi2)):
        lo, hi = mu - 9.0 * sd, mu + 9.0 * sd
        # break points every ~pi of kernel phase at the farthest node
        reach = max(abs(lo - y).max(), abs(hi - y).max())
        pieces = int(min(5000, np.ceil((hi - lo) * reach / (np.pi * hl2)) + 1))
        points = list(np.linspace(lo, hi, pieces + 1)[1:-1])

        def f(x, mu=mu):
            z = np.exp(0.5j * (x - y) ** 2 / hl2) * amp(x, mu)
            return np.concatenate([z.real, z.imag])

        val = _quad_vec(f, lo, hi, points, f"quantum oracle, cluster at {mu}")
        n = y.shape[0]
        psi += np.sqrt(w) * np.exp(1j * phi) * (val[:n] + 1j * val[n:])
    return DensityField.normalized(grid, np.abs(psi) ** 2, "quantum")
