"""
Real and complex Gaussians.

Covariances are plain ``numpy`` arrays of shape ``(d, d)``.  Real ones are
validated as symmetric positive definite by :func:`as_covariance`; complex
ones (real part PSD, symmetric imaginary part) by :func:`as_complex_covariance`.
The complex normalization ``det(2*pi*C) ** -0.5`` always uses the principal
branch.  With a PSD real part the eigenvalues stay in the closed right
half-plane, so no branch tracking is needed.

Points are accepted either as a single vector of shape ``(d,)`` (scalar
result) or as a stack of shape ``(n, d)`` (result of shape ``(n,)``).  In one
dimension a bare float or a 1-D array of points is also fine.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "as_covariance",
    "as_complex_covariance",
    "scalar_covariance",
    "diagonal_covariance",
    "action",
    "gaussian_pdf",
    "ComplexGaussian",
    "complex_gaussian_eval",
    "gaussian_product",
    "gaussian_convolution",
]

SPD_RTOL = 1e-10
SYMMETRY_ATOL = 1e-12
LOG_2PI = np.log(2.0 * np.pi)


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


def as_covariance(matrix, dim=None):
    """Validate ``matrix`` as a real SPD covariance and return a read-only copy.

    A scalar is taken as a 1x1 variance.  Eigenvalues must exceed ``1e-10``
    times the largest eigenvalue.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"covariance must be a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValueError(f"covariance has dimension {m.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("covariance has non-finite entries")
    if np.max(np.abs(m - m.T)) > SYMMETRY_ATOL * max(1.0, np.max(np.abs(m))):
        raise ValueError("covariance is not symmetric")
    eig = np.linalg.eigvalsh(m)
    if eig[-1] <= 0 or eig[0] <= SPD_RTOL * eig[-1]:
        raise ValueError(f"covariance is not positive definite (eigenvalues {eig})")
    return _frozen(m)


def as_complex_covariance(matrix, dim=None):
    """Validate a complex covariance ``R + iJ``: R PSD, R and J symmetric, invertible."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"covariance must be a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValueError(f"covariance has dimension {m.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("covariance has non-finite entries")
    scale = max(1.0, np.max(np.abs(m)))
    if np.max(np.abs(m - m.T)) > SYMMETRY_ATOL * scale:
        raise ValueError("complex covariance is not symmetric")
    re_eig = np.linalg.eigvalsh(m.real)
    if re_eig[0] < -SPD_RTOL * scale:
        raise ValueError("real part of complex covariance is not positive semidefinite")
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= SPD_RTOL * sv[0]:
        raise ValueError("complex covariance is singular")
    return _frozen(m)


def scalar_covariance(variance, dim=1):
    """``variance * I`` in ``dim`` dimensions."""
    return as_covariance(float(variance) * np.eye(dim))


def diagonal_covariance(variances):
    return as_covariance(np.diag(np.asarray(variances, dtype=float)))


def _points(x, dim):
    """Return ``(pts, single)`` with ``pts`` of shape ``(n, dim)``."""
    a = np.asarray(x)
    if a.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar point given for dimension {dim}")
        return a.reshape(1, 1), True
    if a.ndim == 1:
        if a.shape[0] == dim:
            return a.reshape(1, dim), True
        if dim == 1:
            return a.reshape(-1, 1), False
        raise ValueError(f"point has dimension {a.shape[0]}, expected {dim}")
    if a.ndim == 2 and a.shape[1] == dim:
        return a, False
    raise ValueError(f"points have shape {a.shape}, expected (n, {dim})")


def _mean_vector(mean, dim, dtype=float):
    m = np.asarray(mean, dtype=dtype).reshape(-1)
    if m.shape[0] != dim:
        raise ValueError(f"mean has dimension {m.shape[0]}, expected {dim}")
    return m


def _real_quad(diff, cov):
    chol = linalg.cholesky(cov, lower=True)
    z = linalg.solve_triangular(chol, diff.T, lower=True)
    return np.sum(z * z, axis=0), 2.0 * np.sum(np.log(np.diag(chol)))


def action(x, y, eta):
    """Half the squared Mahalanobis distance ``0.5 (x-y)^T eta^-1 (x-y)``."""
    eta = as_covariance(eta)
    d = eta.shape[0]
    px, single_x = _points(x, d)
    py, single_y = _points(y, d)
    q, _ = _real_quad(px - py, eta)
    out = 0.5 * q
    return float(out[0]) if single_x and single_y else out


def gaussian_pdf(x, mean, cov):
    """Normalized real Gaussian density ``G_cov(x - mean)``."""
    cov = as_covariance(cov)
    d = cov.shape[0]
    px, single = _points(x, d)
    mu = _mean_vector(mean, d)
    q, logdet = _real_quad(px - mu, cov)
    out = np.exp(-0.5 * (q + d * LOG_2PI + logdet))
    return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class ComplexGaussian:
    """``scale * det(2 pi cov)^(-1/2) * exp(-0.5 (x-mean)^T cov^-1 (x-mean))``.

    ``mean`` may be complex: products of Gaussians whose covariances have
    different imaginary parts need a complex centre to stay closed-form.
    """

    mean: np.ndarray
    cov: np.ndarray
    scale: complex = 1.0

    def __post_init__(self):
        cov = as_complex_covariance(self.cov)
        mean = np.asarray(self.mean, dtype=complex).reshape(-1)
        if mean.shape[0] != cov.shape[0]:
            raise ValueError(
                f"mean has dimension {mean.shape[0]}, covariance {cov.shape[0]}"
            )
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "scale", complex(self.scale))

    @classmethod
    def real(cls, mean, cov, scale=1.0):
        return cls(np.atleast_1d(np.asarray(mean, dtype=float)), as_covariance(cov), scale)

    @property
    def dim(self):
        return self.cov.shape[0]

    @property
    def is_real(self):
        return (
            not np.any(self.cov.imag)
            and not np.any(self.mean.imag)
            and self.scale.imag == 0
        )

    def log_norm(self):
        """Principal ``log det(2 pi cov)``."""
        return complex(np.log(np.linalg.det(2.0 * np.pi * self.cov)))

    def conj(self):
        """The Gaussian evaluating to ``conj(g(x))`` at real ``x``."""
        return ComplexGaussian(self.mean.conj(), self.cov.conj(), self.scale.conjugate())

    def log_unscaled(self, x):
        """``log(g(x) / scale)`` for points ``x`` of shape ``(n, d)``."""
        diff = x - self.mean
        prec = np.linalg.inv(self.cov)
        q = np.einsum("ni,ij,nj->n", diff, prec, diff)
        return -0.5 * (q + self.log_norm())

    def __call__(self, x):
        return complex_gaussian_eval(x, self)


def complex_gaussian_eval(x, g):
    """Evaluate the complex Gaussian ``g`` at real point(s) ``x``."""
    px, single = _points(x, g.dim)
    if g.is_real:
        out = g.scale.real * gaussian_pdf(px, g.mean.real, g.cov.real).astype(complex)
    else:
        out = g.scale * np.exp(g.log_unscaled(px))
    return complex(out[0]) if single else out


def _log_scale(s):
    with np.errstate(divide="ignore"):
        return np.log(complex(s))


def gaussian_product(a, b):
    """Closed-form product: ``gaussian_product(a, b)(x) == a(x) * b(x)``.

    Covariance ``(A^-1 + B^-1)^-1``, mean ``C (A^-1 m_a + B^-1 m_b)``.  The
    scale is fixed by matching the product at the new mean in log space, which
    keeps the principal-branch normalizations of ``a``, ``b`` and the result
    mutually consistent.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    pa = np.linalg.inv(a.cov)
    pb = np.linalg.inv(b.cov)
    prec = pa + pb
    sv = np.linalg.svd(prec, compute_uv=False)
    if sv[-1] <= SPD_RTOL * sv[0]:
        raise ValueError("sum of inverse covariances is singular")
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (pa @ a.mean + pb @ b.mean)
    m = mean.reshape(1, -1)
    out = ComplexGaussian(mean, cov, 1.0)
    log_scale = (
        _log_scale(a.scale)
        + _log_scale(b.scale)
        + a.log_unscaled(m)[0]
        + b.log_unscaled(m)[0]
        + 0.5 * out.log_norm()
    )
    return ComplexGaussian(mean, cov, np.exp(log_scale))


def gaussian_convolution(a, b):
    """``(a * b)(y) = integral a(y - x) b(x) dx``: means and covariances add."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return ComplexGaussian(a.mean + b.mean, a.cov + b.cov, a.scale * b.scale)
