"""Reduced-rank Gaussian-process machinery on a compact interval.

A stationary Matern 3/2 kernel is expanded in the Laplacian eigenbasis of
[-L, L] under Dirichlet boundary conditions.  Truncating the expansion at M
terms turns the GP into a Bayesian linear model with M basis functions, each
weighted by the square root of the kernel's spectral density at the
corresponding eigenfrequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainOverflowError

DEFAULT_HALF_WIDTH = 3.0
DEFAULT_NUM_BASIS = 40


@dataclass(frozen=True)
class KernelHyper:
    """Process scale and length scale of the Matern 3/2 kernel."""

    alpha: float
    ell: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.ell > 0 and np.isfinite(self.ell)):
            raise ValueError(f"ell must be positive and finite, got {self.ell}")


@dataclass(frozen=True)
class HsgpBasis:
    """Dirichlet eigenbasis of the interval [-L, L], truncated at M terms."""

    L: float = DEFAULT_HALF_WIDTH
    M: int = DEFAULT_NUM_BASIS
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValueError(f"half-width L must be positive, got {self.L}")
        if self.M < 1:
            raise ValueError(f"basis count M must be >= 1, got {self.M}")
        lam = (np.arange(1, self.M + 1) * np.pi / (2.0 * self.L)) ** 2
        lam.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def sqrt_eigenvalues(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)


@dataclass(frozen=True)
class DesignMatrix:
    """Eigenfunction evaluations Phi[i, m] = phi_m(x_i) for a fixed grid."""

    entries: np.ndarray
    inputs: np.ndarray
    basis: "HsgpBasis" = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1]


def eigenvalue(m: int, L: float) -> float:
    """m-th Dirichlet eigenvalue of the negative Laplacian on [-L, L]."""
    if m < 1:
        raise ValueError(f"eigenvalue index must be >= 1, got {m}")
    if L <= 0:
        raise ValueError(f"half-width L must be positive, got {L}")
    return (m * np.pi / (2.0 * L)) ** 2


def eigenfunction(m: int, L: float, x) -> np.ndarray | float:
    """m-th Dirichlet eigenfunction, zero outside [-L, L].

    Values at x = +/-L are forced to exactly zero: the closed form gives
    sin(m*pi) there, which floating point renders as ~1e-16 rather than 0,
    and downstream code relies on exact zeros at the boundary.
    """
    if m < 1:
        raise ValueError(f"eigenfunction index must be >= 1, got {m}")
    if L <= 0:
        raise ValueError(f"half-width L must be positive, got {L}")
    x = np.asarray(x, dtype=float)
    lam = eigenvalue(m, L)
    out = np.sqrt(1.0 / L) * np.sin(np.sqrt(lam) * (x + L))
    out = np.where(np.abs(x) >= L, 0.0, out)
    return out if out.ndim else float(out)


def matern32_spectral_density(omega, hyper: KernelHyper):
    """Spectral density of the Matern 3/2 kernel at angular frequency omega.

    Amplitude carries alpha**2 so that integrating S over frequencies
    recovers the kernel's zero-lag value alpha**2.
    """
    omega = np.asarray(omega, dtype=float)
    a, ell = hyper.alpha, hyper.ell
    out = a**2 * (4.0 * 3.0**1.5 / ell**3) * (3.0 / ell**2 + omega**2) ** -2
    return out if out.ndim else float(out)


def matern32_kernel_exact(xi, xj, hyper: KernelHyper):
    """Closed-form Matern 3/2 covariance between inputs xi and xj."""
    d = np.abs(np.asarray(xi, dtype=float) - np.asarray(xj, dtype=float))
    r = np.sqrt(3.0) * d / hyper.ell
    out = hyper.alpha**2 * (1.0 + r) * np.exp(-r)
    return out if out.ndim else float(out)


def _check_domain(x: np.ndarray, L: float, what: str = "input") -> None:
    if np.any(np.abs(x) > L):
        worst = float(np.max(np.abs(x)))
        raise DomainOverflowError(
            f"{what} outside the approximation domain [-{L}, {L}]: max |x| = {worst}"
        )


def approx_kernel(xi, xj, basis: HsgpBasis, hyper: KernelHyper):
    """Rank-M approximation of the Matern 3/2 covariance.

    Sum over m of S(sqrt(lambda_m)) * phi_m(xi) * phi_m(xj); symmetric in
    its arguments and exactly zero whenever either argument sits on the
    domain boundary.
    """
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    _check_domain(xi, basis.L)
    _check_domain(xj, basis.L)
    s = matern32_spectral_density(basis.sqrt_eigenvalues, hyper)
    pi = _phi_matrix(np.atleast_1d(xi), basis)
    pj = _phi_matrix(np.atleast_1d(xj), basis)
    out = np.einsum("im,m,jm->ij", pi, s, pj)
    if xi.ndim == 0 and xj.ndim == 0:
        return float(out[0, 0])
    return out


def _phi_matrix(x: np.ndarray, basis: HsgpBasis) -> np.ndarray:
    arg = basis.sqrt_eigenvalues[None, :] * (x[:, None] + basis.L)
    phi = np.sqrt(1.0 / basis.L) * np.sin(arg)
    phi[np.abs(x) >= basis.L, :] = 0.0
    return phi


def build_design_matrix(x, basis: HsgpBasis) -> DesignMatrix:
    """Evaluate all M eigenfunctions on a grid, failing fast off-domain.

    Out-of-domain inputs are rejected rather than mapped to the zero rows
    the boundary extension would produce; silent zeros would corrupt any
    likelihood built on top of the matrix.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("design-matrix inputs must be finite")
    _check_domain(x, basis.L, what="design-matrix input")
    entries = _phi_matrix(x, basis)
    entries.setflags(write=False)
    xs = x.copy()
    xs.setflags(write=False)
    return DesignMatrix(entries=entries, inputs=xs, basis=basis)


def spectral_weights(basis: HsgpBasis, hyper: KernelHyper) -> np.ndarray:
    """Per-basis scale sqrt(S(sqrt(lambda_m))) for the linearized GP."""
    return np.sqrt(matern32_spectral_density(basis.sqrt_eigenvalues, hyper))
