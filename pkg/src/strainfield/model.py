"""Joint probabilistic model over all passing events.

Every event k gets its own latent strain function and noise scale, but all
events share one pair of kernel hyperparameters, so each crossing informs
the common notion of what a commuter-train envelope looks like.  Latent
functions use the non-centered form f_k = Phi (w(alpha, ell) * beta_k) with
standard-normal beta_k, which keeps the sampling geometry benign.

Priors: alpha ~ Normal(1, 1) truncated to positives, ell ~ HalfNormal(1),
sigma_k ~ HalfNormal(0.2); together they postulate a signal-to-noise ratio
of 5 on the normalized scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .hsgp import DesignMatrix, HsgpBasis, KernelHyper, build_design_matrix, spectral_weights
from .ingest import StrainEvent

LOG_2PI = math.log(2.0 * math.pi)
ALPHA_PRIOR_MEAN = 1.0
ALPHA_PRIOR_SD = 1.0
ELL_PRIOR_SCALE = 1.0
SIGMA_PRIOR_SCALE = 0.2
# Upper-tail mass of Normal(1, 1) above zero, for the truncation constant.
_ALPHA_TRUNC_LOG_MASS = math.log(0.5 * (1.0 + math.erf(1.0 / math.sqrt(2.0))))


@dataclass(frozen=True)
class ParameterState:
    """One configuration of all model parameters, on the constrained scale."""

    alpha: float
    ell: float
    sigma: np.ndarray  # (K,) noise standard deviations
    beta: np.ndarray  # (K, M) basis weights

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if not (self.alpha > 0 and self.ell > 0):
            raise ValueError("alpha and ell must be positive")
        if not np.all(sigma > 0):
            raise ValueError("all noise scales must be positive")
        if beta.shape[0] != sigma.size:
            raise ValueError("beta must have one row per event")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "beta", beta)

    @property
    def hyper(self) -> KernelHyper:
        return KernelHyper(alpha=self.alpha, ell=self.ell)

    @property
    def num_events(self) -> int:
        return self.sigma.size


class EventDataset:
    """Normalized events plus their design matrices on a shared basis.

    Event series must already be on the common modelling scale; per-event
    lengths may differ.  Rows of all design matrices are stacked once at
    construction so that repeated likelihood evaluations touch contiguous
    arrays only.
    """

    def __init__(self, events: list[StrainEvent], basis: HsgpBasis):
        if not events:
            raise ValueError("dataset needs at least one event")
        for event in events:
            if event.series.normalization is None:
                raise ValueError(
                    f"event {event.event_id} is not normalized; "
                    "run normalization before model assembly"
                )
        self.events = list(events)
        self.basis = basis
        self.designs: list[DesignMatrix] = [
            build_design_matrix(e.series.x, basis) for e in events
        ]
        self.lengths = np.array([len(e.series) for e in events])
        self.starts = np.concatenate(([0], np.cumsum(self.lengths)[:-1]))
        self.phi = np.vstack([d.entries for d in self.designs])
        self.y = np.concatenate([e.series.y for e in events])
        self.event_index = np.repeat(np.arange(len(events)), self.lengths)

    @property
    def num_events(self) -> int:
        return len(self.events)

    @property
    def num_basis(self) -> int:
        return self.basis.M

    @property
    def dim(self) -> int:
        """Dimension of the unconstrained parameter vector."""
        return 2 + self.num_events + self.num_events * self.num_basis

    def parameter_names(self) -> list[str]:
        names = ["alpha", "ell"]
        names += [f"sigma_{k + 1}" for k in range(self.num_events)]
        names += [
            f"beta_{k + 1}_{m + 1}"
            for k in range(self.num_events)
            for m in range(self.num_basis)
        ]
        return names


def event_function(beta_k: np.ndarray, hyper: KernelHyper, design: DesignMatrix) -> np.ndarray:
    """Latent strain function of one event on the design grid."""
    beta_k = np.asarray(beta_k, dtype=float)
    if beta_k.shape != (design.m,):
        raise ValueError(
            f"beta has shape {beta_k.shape}, design expects ({design.m},)"
        )
    w = spectral_weights(design.basis, hyper)
    return design.entries @ (w * beta_k)


def log_prior(state: ParameterState) -> float:
    """Joint log prior density of one parameter state."""
    a, ell = state.alpha, state.ell
    lp = -0.5 * LOG_2PI - 0.5 * (a - ALPHA_PRIOR_MEAN) ** 2 - _ALPHA_TRUNC_LOG_MASS
    lp += math.log(2.0) - 0.5 * LOG_2PI - 0.5 * ell**2
    lp += state.sigma.size * (
        math.log(2.0) - math.log(SIGMA_PRIOR_SCALE) - 0.5 * LOG_2PI
    ) - 0.5 * float(np.sum(state.sigma**2)) / SIGMA_PRIOR_SCALE**2
    lp += -0.5 * float(np.sum(state.beta**2)) - 0.5 * state.beta.size * LOG_2PI
    return lp


def log_likelihood(state: ParameterState, data: EventDataset) -> float:
    """Gaussian observation log likelihood, summed over events and samples."""
    if state.num_events != data.num_events or state.beta.shape[1] != data.num_basis:
        raise ValueError("parameter state does not match dataset shape")
    w = spectral_weights(data.basis, state.hyper)
    coef = w[None, :] * state.beta
    f = np.einsum("nm,nm->n", data.phi, coef[data.event_index])
    r = data.y - f
    rss = np.add.reduceat(r * r, data.starts)
    return float(
        -np.sum(data.lengths * np.log(state.sigma))
        - 0.5 * data.y.size * LOG_2PI
        - 0.5 * np.sum(rss / state.sigma**2)
    )


def to_unconstrained(state: ParameterState) -> np.ndarray:
    """Pack a state into the sampler-facing real vector."""
    return np.concatenate(
        (
            [math.log(state.alpha), math.log(state.ell)],
            np.log(state.sigma),
            state.beta.ravel(),
        )
    )


def from_unconstrained(v: np.ndarray, num_events: int, num_basis: int) -> ParameterState:
    """Unpack a real vector into a constrained parameter state."""
    v = np.asarray(v, dtype=float)
    expected = 2 + num_events + num_events * num_basis
    if v.shape != (expected,):
        raise ValueError(f"expected vector of length {expected}, got {v.shape}")
    return ParameterState(
        alpha=math.exp(v[0]),
        ell=math.exp(v[1]),
        sigma=np.exp(v[2 : 2 + num_events]),
        beta=v[2 + num_events :].reshape(num_events, num_basis),
    )


def log_posterior_unconstrained(
    v: np.ndarray, data: EventDataset
) -> tuple[float, np.ndarray]:
    """Log posterior density and gradient in unconstrained coordinates.

    The value is log prior + log likelihood + the log Jacobian of the
    exp transforms (one log-parameter per positive quantity).  The gradient
    is analytic; its correctness is pinned by finite-difference tests.
    """
    v = np.asarray(v, dtype=float)
    K, M = data.num_events, data.num_basis
    if v.shape != (data.dim,):
        raise ValueError(f"expected vector of length {data.dim}, got {v.shape}")
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        raise NumericalError(
            f"non-finite unconstrained coordinate {bad[0]}", coordinate=int(bad[0])
        )

    alpha = math.exp(v[0])
    ell = math.exp(v[1])
    sigma = np.exp(v[2 : 2 + K])
    beta = v[2 + K :].reshape(K, M)

    lam = data.basis.eigenvalues
    # w_m = alpha * sqrt(c_m(ell)) with c the unit-amplitude spectral density
    c = (4.0 * 3.0**1.5 / ell**3) * (3.0 / ell**2 + lam) ** -2
    w = alpha * np.sqrt(c)
    coef = w[None, :] * beta
    f = np.einsum("nm,nm->n", data.phi, coef[data.event_index])
    r = data.y - f
    rss = np.add.reduceat(r * r, data.starts)
    inv_var = 1.0 / sigma**2

    loglik = float(
        -np.sum(data.lengths * np.log(sigma))
        - 0.5 * data.y.size * LOG_2PI
        - 0.5 * np.sum(rss * inv_var)
    )
    logprior = (
        -0.5 * LOG_2PI
        - 0.5 * (alpha - ALPHA_PRIOR_MEAN) ** 2
        - _ALPHA_TRUNC_LOG_MASS
        + math.log(2.0)
        - 0.5 * LOG_2PI
        - 0.5 * ell**2
        + K * (math.log(2.0) - math.log(SIGMA_PRIOR_SCALE) - 0.5 * LOG_2PI)
        - 0.5 * float(np.sum(sigma**2)) / SIGMA_PRIOR_SCALE**2
        - 0.5 * float(np.sum(beta**2))
        - 0.5 * beta.size * LOG_2PI
    )
    log_jacobian = float(v[0] + v[1] + np.sum(v[2 : 2 + K]))
    value = logprior + loglik + log_jacobian

    # Phi_k^T r_k per event, then chain rule through w and the exp maps.
    G = np.add.reduceat(data.phi * r[:, None], data.starts, axis=0)
    G_scaled = G * inv_var[:, None]
    grad_beta = G_scaled * w[None, :] - beta

    g_w = np.sum(G_scaled * beta, axis=0)
    dloglik_dalpha = float(np.dot(g_w, w)) / alpha
    dlogc_dell = -3.0 / ell + 12.0 / (ell**3 * (3.0 / ell**2 + lam))
    dloglik_dell = float(np.dot(g_w, w * 0.5 * dlogc_dell))

    grad = np.empty_like(v)
    grad[0] = alpha * (dloglik_dalpha - (alpha - ALPHA_PRIOR_MEAN)) + 1.0
    grad[1] = ell * (dloglik_dell - ell) + 1.0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        dll_dsigma = -data.lengths / sigma + rss / sigma**3
    grad[2 : 2 + K] = sigma * (dll_dsigma - sigma / SIGMA_PRIOR_SCALE**2) + 1.0
    grad[2 + K :] = grad_beta.ravel()

    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        bad_coord = None
        finite = np.isfinite(grad)
        if not np.all(finite):
            bad_coord = int(np.flatnonzero(~finite)[0])
        raise NumericalError(
            "non-finite log-posterior or gradient"
            + (f" at coordinate {bad_coord}" if bad_coord is not None else ""),
            coordinate=bad_coord,
        )
    return value, grad


class MarginalModel:
    """Posterior over (alpha, ell, sigma) with the basis weights integrated out.

    Given the hyperparameters, each event's weights enter linearly with a
    Gaussian prior, so their marginal is available in closed form through
    the Woodbury identity.  Per-event Gram blocks Phi^T Phi and Phi^T y are
    precomputed once; afterwards every density evaluation costs O(K * M^3)
    regardless of the number of strain samples.  Sampling in this collapsed
    space sidesteps the scale ridge between the process amplitude and the
    weights that makes the joint space expensive to traverse, and the
    weights are recovered exactly from their Gaussian conditional per draw.
    """

    def __init__(self, data: EventDataset):
        self.data = data
        self.dim = 2 + data.num_events
        self.gram = [d.entries.T @ d.entries for d in data.designs]
        self.xty = [
            d.entries.T @ e.series.y for d, e in zip(data.designs, data.events)
        ]
        self.yty = [float(e.series.y @ e.series.y) for e in data.events]

    def _spectral_diag(self, alpha: float, ell: float) -> tuple[np.ndarray, np.ndarray]:
        """(d, dlog c / dell) for d_m = alpha^2 c_m(ell)."""
        lam = self.data.basis.eigenvalues
        c = (4.0 * 3.0**1.5 / ell**3) * (3.0 / ell**2 + lam) ** -2
        dlogc_dell = -3.0 / ell + 12.0 / (ell**3 * (3.0 / ell**2 + lam))
        return alpha**2 * c, dlogc_dell

    def log_posterior(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """Collapsed log posterior and gradient in [log a, log l, log s_1..K]."""
        u = np.asarray(u, dtype=float)
        K = self.data.num_events
        M = self.data.num_basis
        if u.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {u.shape}")
        bad = np.flatnonzero(~np.isfinite(u))
        if bad.size:
            raise NumericalError(
                f"non-finite unconstrained coordinate {bad[0]}", coordinate=int(bad[0])
            )
        extreme = np.flatnonzero(np.abs(u) > 150.0)
        if extreme.size:
            raise NumericalError(
                "unconstrained coordinate outside the numeric range of exp",
                coordinate=int(extreme[0]),
            )
        alpha, ell = math.exp(u[0]), math.exp(u[1])
        sigma = np.exp(u[2:])
        d, dlogc_dell = self._spectral_diag(alpha, ell)
        inv_d = 1.0 / d

        value = 0.0
        g_logalpha = 0.0
        g_logell = 0.0
        g_logsigma = np.zeros(K)
        for k in range(K):
            n_k = int(self.data.lengths[k])
            s2 = sigma[k] ** 2
            A = self.gram[k] + np.diag(s2 * inv_d)
            try:
                L = np.linalg.cholesky(A)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"marginal covariance not PD for event {k}") from exc
            q = self.xty[k]
            mean_vec = np.linalg.solve(A, q)  # A^-1 q
            B_diag = np.diag(np.linalg.inv(A))
            logdet_A = 2.0 * float(np.sum(np.log(np.diag(L))))
            with np.errstate(over="ignore", divide="ignore"):
                quad = (self.yty[k] - float(q @ mean_vec)) / s2
            value += -0.5 * (
                n_k * LOG_2PI
                + (n_k - M) * math.log(s2)
                + logdet_A
                + float(np.sum(np.log(d)))
                + quad
            )
            # derivative with respect to the spectral diagonal d_m
            g_d = -0.5 * (
                -s2 * B_diag * inv_d**2 + inv_d - mean_vec**2 * inv_d**2
            )
            g_logalpha += float(np.sum(g_d * 2.0 * d))
            g_logell += float(np.sum(g_d * d * ell * dlogc_dell))
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                dll_ds2 = -0.5 * (
                    (n_k - M) / s2
                    + float(np.sum(B_diag * inv_d))
                    + float(mean_vec @ (inv_d * mean_vec)) / s2
                    - quad / s2
                )
            g_logsigma[k] = dll_ds2 * 2.0 * s2

        # hyperpriors and the Jacobian of the log transforms
        value += (
            -0.5 * LOG_2PI
            - 0.5 * (alpha - ALPHA_PRIOR_MEAN) ** 2
            - _ALPHA_TRUNC_LOG_MASS
            + math.log(2.0)
            - 0.5 * LOG_2PI
            - 0.5 * ell**2
            + K * (math.log(2.0) - math.log(SIGMA_PRIOR_SCALE) - 0.5 * LOG_2PI)
            - 0.5 * float(np.sum(sigma**2)) / SIGMA_PRIOR_SCALE**2
            + float(np.sum(u))
        )
        grad = np.empty(self.dim)
        grad[0] = g_logalpha + alpha * (-(alpha - ALPHA_PRIOR_MEAN)) + 1.0
        grad[1] = g_logell + ell * (-ell) + 1.0
        grad[2:] = g_logsigma + sigma * (-sigma / SIGMA_PRIOR_SCALE**2) + 1.0

        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite collapsed log-posterior")
        return float(value), grad

    def sample_basis_weights(
        self, u: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        """Exact draw of all events' weights from their Gaussian conditional."""
        K = self.data.num_events
        M = self.data.num_basis
        alpha, ell = math.exp(u[0]), math.exp(u[1])
        sigma = np.exp(u[2:])
        d, _ = self._spectral_diag(alpha, ell)
        w = np.sqrt(d)
        beta = np.empty((K, M))
        for k in range(K):
            s2 = sigma[k] ** 2
            prec = np.eye(M) + (w[:, None] * self.gram[k] * w[None, :]) / s2
            L = np.linalg.cholesky(prec)
            mean = np.linalg.solve(prec, w * self.xty[k] / s2)
            z = rng.normal(size=M)
            beta[k] = mean + np.linalg.solve(L.T, z)
        return beta
