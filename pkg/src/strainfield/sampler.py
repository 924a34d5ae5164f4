"""No-U-turn Hamiltonian Monte Carlo with windowed warmup adaptation.

The sampler works on an arbitrary differentiable log density.  Trajectory
lengths double until the no-U-turn criterion fires, the step size follows
dual averaging toward a target acceptance statistic, and a diagonal mass
matrix is re-estimated in expanding warmup windows.  Chains draw their
randomness from (seed, chain index), so serial and parallel execution give
identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InitializationFailure, NumericalError
from .model import EventDataset, MarginalModel

# Energy error beyond which a leapfrog trajectory counts as divergent.
DIVERGENCE_THRESHOLD = 1000.0
MAX_INIT_ATTEMPTS = 100


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup_iterations: int = 1000
    sampling_iterations: int = 1000
    seed: int = 0
    target_acceptance: float = 0.8
    max_tree_depth: int = 10

    def __post_init__(self):
        if min(self.chains, self.warmup_iterations, self.sampling_iterations) < 1:
            raise ValueError("chains and iteration counts must be >= 1")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ValueError("target_acceptance must lie in (0, 1)")
        if self.max_tree_depth < 1:
            raise ValueError("max_tree_depth must be >= 1")


@dataclass
class PosteriorSamples:
    """Post-warmup draws of all chains, stored on the constrained scale."""

    draws: np.ndarray  # (chains, iterations, dim)
    names: list[str]
    divergent: np.ndarray  # (chains, iterations) bool
    tree_depth: np.ndarray  # (chains, iterations) int
    energy: np.ndarray  # (chains, iterations) float
    config: SamplerConfig
    warnings: list[str] = field(default_factory=list)

    @property
    def num_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def divergence_count(self) -> int:
        return int(self.divergent.sum())

    def get(self, name: str) -> np.ndarray:
        """Draws of one parameter as a (chains, iterations) array."""
        return self.draws[:, :, self.names.index(name)]

    def flat(self, name: str) -> np.ndarray:
        return self.get(name).reshape(-1)


class _Hamiltonian:
    """Log density plus kinetic bookkeeping for one diagonal metric."""

    def __init__(self, logp_grad: Callable, inv_metric: np.ndarray):
        self._logp_grad = logp_grad
        self.inv_metric = inv_metric
        self.evaluations = 0

    def logp(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        self.evaluations += 1
        try:
            value, grad = self._logp_grad(theta)
        except (NumericalError, FloatingPointError, OverflowError):
            return -np.inf, np.zeros_like(theta)
        if not np.isfinite(value):
            return -np.inf, np.zeros_like(theta)
        return float(value), grad

    def kinetic(self, r: np.ndarray) -> float:
        with np.errstate(over="ignore"):
            return 0.5 * float(np.dot(r * r, self.inv_metric))

    def sample_momentum(self, rng: np.random.Generator, dim: int) -> np.ndarray:
        return rng.normal(size=dim) / np.sqrt(self.inv_metric)


def _leapfrog(ham, theta, r, grad, eps):
    r = r + 0.5 * eps * grad
    theta = theta + eps * ham.inv_metric * r
    logp, grad = ham.logp(theta)
    r = r + 0.5 * eps * grad
    return theta, r, logp, grad


class _Tree:
    """One no-U-turn trajectory, built by recursive doubling."""

    __slots__ = (
        "ham", "rng", "eps", "log_u", "joint0",
        "divergent", "n_accept_stat", "sum_accept_stat",
    )

    def __init__(self, ham, rng, eps, log_u, joint0):
        self.ham = ham
        self.rng = rng
        self.eps = eps
        self.log_u = log_u
        self.joint0 = joint0
        self.divergent = False
        self.n_accept_stat = 0
        self.sum_accept_stat = 0.0

    def build(self, theta, r, grad, direction, depth):
        """Returns (theta-, r-, grad-, theta+, r+, grad+, sample, logp, n, keep_going)."""
        if depth == 0:
            theta1, r1, logp1, grad1 = _leapfrog(
                self.ham, theta, r, grad, direction * self.eps
            )
            joint = logp1 - self.ham.kinetic(r1)
            n = int(self.log_u <= joint)
            keep_going = self.log_u < joint + DIVERGENCE_THRESHOLD
            if not keep_going:
                self.divergent = True
            self.sum_accept_stat += min(1.0, math.exp(min(0.0, joint - self.joint0)))
            self.n_accept_stat += 1
            return theta1, r1, grad1, theta1, r1, grad1, theta1, logp1, n, keep_going

        (tm, rm, gm, tp, rp, gp, sample, logp_s, n, keep) = self.build(
            theta, r, grad, direction, depth - 1
        )
        if keep:
            if direction == -1:
                tm, rm, gm, _, _, _, sample2, logp_s2, n2, keep2 = self.build(
                    tm, rm, gm, direction, depth - 1
                )
            else:
                _, _, _, tp, rp, gp, sample2, logp_s2, n2, keep2 = self.build(
                    tp, rp, gp, direction, depth - 1
                )
            if n2 > 0 and self.rng.uniform() < n2 / max(n + n2, 1):
                sample, logp_s = sample2, logp_s2
            n += n2
            keep = keep2 and _no_u_turn(tm, rm, tp, rp, self.ham.inv_metric)
        return tm, rm, gm, tp, rp, gp, sample, logp_s, n, keep


def _no_u_turn(theta_minus, r_minus, theta_plus, r_plus, inv_metric) -> bool:
    span = theta_plus - theta_minus
    return (
        float(np.dot(span, inv_metric * r_minus)) >= 0.0
        and float(np.dot(span, inv_metric * r_plus)) >= 0.0
    )


def _nuts_step(ham, theta, logp, grad, eps, max_depth, rng):
    """One NUTS transition; returns the new state and iteration diagnostics."""
    dim = theta.size
    r0 = ham.sample_momentum(rng, dim)
    joint0 = logp - ham.kinetic(r0)
    log_u = joint0 + math.log(rng.uniform())
    tree = _Tree(ham, rng, eps, log_u, joint0)

    tm = tp = theta
    rm = rp = r0
    gm = gp = grad
    sample, logp_sample = theta, logp
    n = 1
    depth = 0
    keep_going = True
    while keep_going and depth < max_depth:
        direction = -1 if rng.uniform() < 0.5 else 1
        if direction == -1:
            tm, rm, gm, _, _, _, cand, logp_cand, n2, keep2 = tree.build(
                tm, rm, gm, direction, depth
            )
        else:
            _, _, _, tp, rp, gp, cand, logp_cand, n2, keep2 = tree.build(
                tp, rp, gp, direction, depth
            )
        if keep2 and rng.uniform() < min(1.0, n2 / max(n, 1)):
            sample, logp_sample = cand, logp_cand
        n += n2
        depth += 1
        keep_going = keep2 and _no_u_turn(tm, rm, tp, rp, ham.inv_metric)

    accept_stat = (
        tree.sum_accept_stat / tree.n_accept_stat if tree.n_accept_stat else 0.0
    )
    _, grad_new = ham.logp(sample) if sample is not theta else (logp, grad)
    return sample, logp_sample, grad_new, accept_stat, tree.divergent, depth, -joint0


def _find_reasonable_epsilon(ham, theta, logp, grad, rng) -> float:
    eps = 1.0
    r = ham.sample_momentum(rng, theta.size)
    joint = logp - ham.kinetic(r)
    _, r1, logp1, _ = _leapfrog(ham, theta, r, grad, eps)
    joint1 = logp1 - ham.kinetic(r1)
    direction = 1.0 if joint1 - joint > math.log(0.5) else -1.0
    for _ in range(100):
        eps *= 2.0**direction
        _, r1, logp1, _ = _leapfrog(ham, theta, r, grad, eps)
        joint1 = logp1 - ham.kinetic(r1)
        if not np.isfinite(joint1):
            joint1 = -np.inf
        if direction * (joint1 - joint) <= direction * math.log(0.5):
            break
    return eps


class _DualAveraging:
    """Nesterov dual averaging of the log step size."""

    def __init__(self, eps0: float, target: float):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.count = 0
        self.gamma, self.t0, self.kappa = 0.05, 10.0, 0.75

    def update(self, accept_stat: float) -> float:
        self.count += 1
        frac = 1.0 / (self.count + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.count) / self.gamma * self.h_bar
        weight = self.count**-self.kappa
        self.log_eps_bar = weight * self.log_eps + (1.0 - weight) * self.log_eps_bar
        return math.exp(self.log_eps)

    @property
    def adapted(self) -> float:
        return math.exp(self.log_eps_bar)


def _adaptation_windows(warmup: int) -> tuple[int, list[int]]:
    """(initial fast buffer end, metric-window end iterations)."""
    if warmup < 20:
        return warmup, []
    if warmup < 150:
        init = max(1, int(0.15 * warmup))
        term = max(1, int(0.10 * warmup))
    else:
        init, term = 75, 50
    ends = []
    start, size = init, max(25 if warmup >= 150 else (warmup - init - term), 25)
    while start + size < warmup - term:
        ends.append(start + size)
        start += size
        size *= 2
    ends.append(warmup - term)
    return init, ends


def sample_nuts(
    logp_grad: Callable,
    dim: int,
    config: SamplerConfig,
    initial_points: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Run all configured chains on an arbitrary log density.

    Returns unconstrained draws (chains, iterations, dim) with divergence
    flags, tree depths, and energies per iteration.
    """
    draws = np.empty((config.chains, config.sampling_iterations, dim))
    divergent = np.zeros((config.chains, config.sampling_iterations), dtype=bool)
    depths = np.zeros((config.chains, config.sampling_iterations), dtype=int)
    energies = np.zeros((config.chains, config.sampling_iterations))

    for chain in range(config.chains):
        rng = np.random.default_rng([config.seed, chain])
        ham = _Hamiltonian(logp_grad, np.ones(dim))

        theta = logp = grad = None
        if initial_points is not None:
            theta = np.asarray(initial_points[chain], dtype=float)
            logp, grad = ham.logp(theta)
            if not np.isfinite(logp):
                raise InitializationFailure(
                    f"supplied initial point for chain {chain} has non-finite density"
                )
        else:
            for _ in range(MAX_INIT_ATTEMPTS):
                candidate = rng.uniform(-1.0, 1.0, size=dim)
                logp_c, grad_c = ham.logp(candidate)
                if np.isfinite(logp_c):
                    theta, logp, grad = candidate, logp_c, grad_c
                    break
            if theta is None:
                raise InitializationFailure(
                    f"no finite starting density in {MAX_INIT_ATTEMPTS} attempts"
                )

        eps = _find_reasonable_epsilon(ham, theta, logp, grad, rng)
        averaging = _DualAveraging(eps, config.target_acceptance)
        init_end, window_ends = _adaptation_windows(config.warmup_iterations)
        welford_n = 0
        welford_mean = np.zeros(dim)
        welford_m2 = np.zeros(dim)

        for it in range(config.warmup_iterations):
            theta, logp, grad, accept_stat, _, _, _ = _nuts_step(
                ham, theta, logp, grad, eps, config.max_tree_depth, rng
            )
            eps = averaging.update(accept_stat)
            if it >= init_end:
                welford_n += 1
                delta = theta - welford_mean
                welford_mean += delta / welford_n
                welford_m2 += delta * (theta - welford_mean)
            if window_ends and it + 1 == window_ends[0]:
                window_ends.pop(0)
                if welford_n >= 2:
                    var = welford_m2 / (welford_n - 1)
                    reg = welford_n / (welford_n + 5.0)
                    ham.inv_metric = reg * var + (1.0 - reg) * 1e-3
                    welford_n = 0
                    welford_mean[:] = 0.0
                    welford_m2[:] = 0.0
                    eps = _find_reasonable_epsilon(ham, theta, logp, grad, rng)
                    averaging = _DualAveraging(eps, config.target_acceptance)

        eps = averaging.adapted
        for it in range(config.sampling_iterations):
            theta, logp, grad, _, div, depth, energy = _nuts_step(
                ham, theta, logp, grad, eps, config.max_tree_depth, rng
            )
            draws[chain, it] = theta
            divergent[chain, it] = div
            depths[chain, it] = depth
            energies[chain, it] = energy

    return draws, divergent, depths, energies


def run_sampler(data: EventDataset, config: SamplerConfig) -> PosteriorSamples:
    """Sample the joint posterior of the multilevel strain model.

    NUTS runs on the collapsed posterior over (alpha, ell, sigma) with the
    per-event basis weights integrated out analytically; each retained draw
    is then completed with an exact draw of the weights from their Gaussian
    conditional.  The assembled draws target the same joint posterior as
    sampling everything at once, without the amplitude/weights ridge that
    forces tiny step sizes in the joint space.
    """
    marginal = MarginalModel(data)
    raw, divergent, depths, energies = sample_nuts(
        marginal.log_posterior, marginal.dim, config
    )

    K, M = data.num_events, data.num_basis
    chains, iters, _ = raw.shape
    draws = np.empty((chains, iters, data.dim))
    draws[:, :, : 2 + K] = np.exp(raw)
    for chain in range(chains):
        beta_rng = np.random.default_rng([config.seed, chain, 0x62657461])
        for it in range(iters):
            beta = marginal.sample_basis_weights(raw[chain, it], beta_rng)
            draws[chain, it, 2 + K :] = beta.ravel()

    warnings = []
    rate = divergent.mean()
    if rate > 0.10:
        warnings.append(
            f"convergence-failure: {rate:.1%} divergent transitions post-warmup"
        )
    return PosteriorSamples(
        draws=draws,
        names=data.parameter_names(),
        divergent=divergent,
        tree_depth=depths,
        energy=energies,
        config=config,
        warnings=warnings,
    )
