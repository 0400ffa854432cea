"""Gibbs samplers for Huberised regularised quantile regression.

Two penalty families share one scan skeleton:

* lasso: coefficient scales s_j with a gamma-updated squared rate, and
* elastic net: shifted latents t_j > 1 with a gamma step for the ridge
  rate and a one-step Metropolis-Hastings move for the reparameterised
  l1 rate.

Every latent block has a generalised inverse Gaussian full conditional;
the robustness parameter eta is updated by a gamma approximation whose
(shape, rate) pair is refined by a short fixed-point iteration before a
single draw is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import specfun
from .randist import RngStream, as_generator, gig_rvs, mvn_from_precision

__all__ = [
    "Dataset",
    "LassoHyper",
    "ElasticNetHyper",
    "ModelSpec",
    "ChainState",
    "ChainHealth",
    "PosteriorSamples",
    "ChainError",
    "initial_state",
    "update_beta",
    "update_sigma",
    "update_v",
    "update_rho2",
    "update_s",
    "update_lambda1_sq",
    "update_t",
    "update_lambda4",
    "mh_update_lambda3_tilde",
    "lambda3_log_accept_ratio",
    "refine_eta_gamma_params",
    "update_eta_approx",
    "run_chain",
    "summarize",
]

_POSITIVITY_FLOOR = 1e-300


class ChainError(RuntimeError):
    """An update failed; carries the iteration index and block name."""


@dataclass(frozen=True)
class Dataset:
    """Design matrix X (n x k) and response y (n,); all entries finite."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d array")
        if y.ndim != 1 or y.size != X.shape[0]:
            raise ValueError("y must be 1-d with len(y) == X.shape[0]")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need n >= 1 and k >= 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class LassoHyper:
    """Gamma hyperparameters: (a, b) for the squared l1 rate, (c, d) for eta."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) <= 0:
            raise ValueError("lasso hyperparameters must be > 0")

    @property
    def eta_prior(self):
        return (self.c, self.d)


@dataclass(frozen=True)
class ElasticNetHyper:
    """Gamma hyperparameters: (a1, b1) for the reparameterised l1 rate,
    (a2, b2) for the ridge rate, (a3, b3) for eta."""

    a1: float = 1.0
    b1: float = 1.0
    a2: float = 1.0
    b2: float = 1.0
    a3: float = 1.0
    b3: float = 1.0

    def __post_init__(self):
        if min(self.a1, self.b1, self.a2, self.b2, self.a3, self.b3) <= 0:
            raise ValueError("elastic-net hyperparameters must be > 0")

    @property
    def eta_prior(self):
        return (self.a3, self.b3)


PenaltyHyper = Union[LassoHyper, ElasticNetHyper]


@dataclass(frozen=True)
class ModelSpec:
    """Quantile level, penalty family and sampler controls.

    rho2_invgamma switches the scale prior from the default improper
    1/rho2 to a proper inverse gamma (shape, rate); the Gibbs update
    absorbs it exactly.  fixed_lambda1_sq / fixed_lambda3_tilde pin the
    corresponding rate instead of sampling it (prior off-switches used
    by diagnostics and nesting checks).
    """

    tau: float = 0.5
    penalty: PenaltyHyper = field(default_factory=LassoHyper)
    n_iter: int = 2500
    burn_in: int = 500
    thin: int = 1
    eta_inner_iters: int = 10
    eta_tol: float = 1e-8
    seed: int = 0
    rho2_invgamma: Optional[tuple] = None
    fixed_lambda1_sq: Optional[float] = None
    fixed_lambda3_tilde: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie in (0, 1)")
        if self.n_iter < 1 or self.burn_in < 0 or self.burn_in >= self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.eta_inner_iters < 1 or self.eta_tol <= 0:
            raise ValueError("eta refinement needs positive iteration budget and tolerance")
        if self.rho2_invgamma is not None:
            a0, g0 = self.rho2_invgamma
            if a0 <= 0 or g0 <= 0:
                raise ValueError("inverse-gamma prior needs positive shape and rate")

    @property
    def is_lasso(self) -> bool:
        return isinstance(self.penalty, LassoHyper)


@dataclass
class ChainState:
    """Current values of every sampled block.

    Exactly one of (s, lam1_sq) and (t, lam3_tilde, lam4) is populated,
    matching the penalty family.
    """

    beta: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    rho2: float
    eta: float
    s: Optional[np.ndarray] = None
    lam1_sq: Optional[float] = None
    t: Optional[np.ndarray] = None
    lam3_tilde: Optional[float] = None
    lam4: Optional[float] = None


@dataclass
class ChainHealth:
    """Counters for numerically guarded events during a run."""

    positivity_clamps: int = 0
    eta_update_skips: int = 0
    mh_proposals: int = 0
    mh_accepts: int = 0

    def as_lines(self) -> list:
        rate = self.mh_accepts / self.mh_proposals if self.mh_proposals else float("nan")
        return [
            f"positivity_clamps={self.positivity_clamps}",
            f"eta_update_skips={self.eta_update_skips}",
            f"mh_proposals={self.mh_proposals}",
            f"mh_accepts={self.mh_accepts}",
            f"mh_accept_rate={rate:.6f}" if self.mh_proposals else "mh_accept_rate=nan",
        ]


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws, one row per retained scan."""

    draws: np.ndarray
    columns: list
    health: ChainHealth

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.columns.index(name)]


def initial_state(data: Dataset, spec: ModelSpec) -> ChainState:
    """Interior starting point: unit latents, coefficient zero, data-scaled rho2."""
    n, k = data.n, data.k
    var_y = float(np.var(data.y, ddof=1)) if n > 1 else 0.0
    state = ChainState(
        beta=np.zeros(k),
        v=np.ones(n),
        sigma=np.ones(n),
        rho2=var_y if var_y > 0 else 1.0,
        eta=1.0,
    )
    if spec.is_lasso:
        state.s = np.ones(k)
        state.lam1_sq = spec.fixed_lambda1_sq if spec.fixed_lambda1_sq is not None else 1.0
    else:
        state.t = np.full(k, 2.0)
        state.lam3_tilde = (
            spec.fixed_lambda3_tilde if spec.fixed_lambda3_tilde is not None else 1.0
        )
        state.lam4 = 1.0
    return state


def _prior_precision_diag(state: ChainState, spec: ModelSpec) -> np.ndarray:
    if spec.is_lasso:
        return 1.0 / (state.rho2 * state.s)
    return (2.0 * state.lam4 / state.rho2) * state.t / (state.t - 1.0)


def update_beta(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> np.ndarray:
    """Multivariate-normal block draw from the precision form.

    Precision X' V^-1 X + prior diagonal, linear term
    X' V^-1 (y - (1-2 tau) v), with V = diag(4 sigma_i v_i).
    """
    gen = as_generator(rng)
    # the product of two floored latents can still underflow; keep 1/V finite
    winv = 1.0 / np.maximum(4.0 * state.sigma * state.v, 1e-280)
    xw = data.X * winv[:, None]
    precision = xw.T @ data.X + np.diag(_prior_precision_diag(state, spec))
    h = xw.T @ (data.y - (1.0 - 2.0 * spec.tau) * state.v)
    return mvn_from_precision(gen, precision, h)


def update_sigma(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> np.ndarray:
    """Per-observation GIG(-1/2) draws for the global mixing latents."""
    gen = as_generator(rng)
    resid = data.y - data.X @ state.beta - (1.0 - 2.0 * spec.tau) * state.v
    tau = spec.tau
    d_sq = resid * resid / (4.0 * state.v) + tau * (1.0 - tau) * state.v + state.eta * state.rho2
    c = math.sqrt(state.eta / state.rho2)
    return gig_rvs(gen, -0.5, c, np.sqrt(d_sq))


def update_v(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> np.ndarray:
    """Per-observation GIG(1/2) draws for the asymmetry latents.

    The x-coefficient (1-2 tau)^2/(4 sigma) + tau(1-tau)/sigma collapses
    to 1/(4 sigma); exact-zero residuals hit the gamma boundary of the
    GIG sampler rather than being jittered.
    """
    gen = as_generator(rng)
    resid = data.y - data.X @ state.beta
    c = 0.5 / np.sqrt(state.sigma)
    d = np.abs(resid) * c
    return gig_rvs(gen, 0.5, c, d)


def update_rho2(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> float:
    """Single GIG draw for the scale; order -(n + k/2) under the invariant prior.

    A proper inverse-gamma prior (shape a0, rate g0) shifts the order by
    -a0 and adds 2 g0 to the 1/x coefficient.
    """
    gen = as_generator(rng)
    n, k = data.n, data.k
    c_sq = state.eta * float(np.sum(1.0 / state.sigma))
    d_sq = state.eta * float(np.sum(state.sigma))
    if spec.is_lasso:
        d_sq += float(np.sum(state.beta**2 / state.s))
    else:
        d_sq += float(np.sum(2.0 * state.lam4 * state.t * state.beta**2 / (state.t - 1.0)))
    nu = -(n + k / 2.0)
    if spec.rho2_invgamma is not None:
        a0, g0 = spec.rho2_invgamma
        nu -= a0
        d_sq += 2.0 * g0
    return float(gig_rvs(gen, nu, math.sqrt(c_sq), math.sqrt(d_sq)))


def update_s(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> np.ndarray:
    """Lasso coefficient-scale latents: GIG(1/2, l1sq, beta_j^2/rho2)."""
    gen = as_generator(rng)
    c = math.sqrt(state.lam1_sq)
    d = np.abs(state.beta) / math.sqrt(state.rho2)
    return gig_rvs(gen, 0.5, c, d)


def update_lambda1_sq(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> float:
    """Gamma(a + k, b + sum(s)/2) draw for the squared l1 rate."""
    gen = as_generator(rng)
    hyper = spec.penalty
    shape = hyper.a + data.k
    rate = hyper.b + 0.5 * float(np.sum(state.s))
    return float(gen.gamma(shape) / rate)


def update_t(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> np.ndarray:
    """Elastic-net latents t_j > 1; t_j - 1 is GIG(1/2, 2 l3t, 2 l4 beta_j^2/rho2)."""
    gen = as_generator(rng)
    c = math.sqrt(2.0 * state.lam3_tilde)
    d = np.sqrt(2.0 * state.lam4 / state.rho2) * np.abs(state.beta)
    return 1.0 + gig_rvs(gen, 0.5, c, d)


def update_lambda4(state: ChainState, data: Dataset, spec: ModelSpec, rng) -> float:
    """Gamma(k/2 + a2, sum(t beta^2 / (rho2 (t-1))) + b2) draw for the ridge rate."""
    gen = as_generator(rng)
    hyper = spec.penalty
    shape = data.k / 2.0 + hyper.a2
    rate = float(np.sum(state.t * state.beta**2 / (state.rho2 * (state.t - 1.0)))) + hyper.b2
    return float(gen.gamma(shape) / rate)


def _log_lambda3_target(lam: float, k: int, sum_t: float, a1: float, b1: float) -> float:
    return (
        -k * specfun.log_upper_gamma_half(lam)
        + (k / 2.0 + a1 - 1.0) * math.log(lam)
        - (sum_t + b1) * lam
    )


def lambda3_log_accept_ratio(current: float, proposal: float, k: int, sum_t: float,
                             a1: float, b1: float) -> float:
    """log of the Metropolis-Hastings ratio for the l1-rate move.

    Target kernel Gamma^{-k}(1/2, lam) lam^{k/2+a1-1} exp(-(sum_t+b1) lam)
    against the independence proposal Gamma(k+a1, b1 + sum_t - k);
    identically zero when k = 0 (target and proposal coincide).
    """
    prop_rate = b1 + (sum_t - k)

    def log_q(lam: float) -> float:
        return (k + a1 - 1.0) * math.log(lam) - prop_rate * lam

    return (
        _log_lambda3_target(proposal, k, sum_t, a1, b1)
        - _log_lambda3_target(current, k, sum_t, a1, b1)
        + log_q(current)
        - log_q(proposal)
    )


def mh_update_lambda3_tilde(state: ChainState, data: Dataset, spec: ModelSpec, rng,
                            health: Optional[ChainHealth] = None) -> float:
    """One Metropolis-Hastings step for the reparameterised l1 rate.

    Independence proposal Gamma(k + a1, b1 + sum(t_j - 1)), whose tail
    matches the target; the acceptance ratio is assembled entirely in
    log space (the incomplete-gamma factor via its stable logarithm).
    """
    gen = as_generator(rng)
    hyper = spec.penalty
    k = data.k
    sum_t = float(np.sum(state.t))
    prop_rate = hyper.b1 + (sum_t - k)
    proposal = float(gen.gamma(k + hyper.a1) / prop_rate)
    log_ratio = lambda3_log_accept_ratio(
        state.lam3_tilde, proposal, k, sum_t, hyper.a1, hyper.b1
    )
    u = gen.random()
    accept = math.log(u) < log_ratio if u > 0 else True
    if health is not None:
        health.mh_proposals += 1
        health.mh_accepts += int(accept)
    return proposal if accept else state.lam3_tilde


def refine_eta_gamma_params(a: float, b: float, s_sum: float, n: int,
                            max_iter: int, tol: float, eta_fallback: float):
    """Fixed-point refinement of the Gamma(shape A, rate B) approximation
    to the eta full conditional.

    Starts from A = a + n/2, B = s_sum + b - n (the large-argument
    asymptotics of the Bessel normaliser); each pass matches the first
    two log-density derivatives at eta = A/B.  If the initial B is not
    positive, the iteration starts from ``eta_fallback`` instead.

    Returns (A, B, gaps) where gaps is the per-iteration convergence
    criterion |eta / (A/B) - 1|.
    """
    A = a + n / 2.0
    B = s_sum + b - n
    eta = eta_fallback if B <= 0 else None
    gaps = []
    for _ in range(max_iter):
        if B > 0:
            eta = A / B
        A = a + n * eta * eta * specfun.log_k1_deriv2(eta)
        B = b + (A - a) / eta + n * specfun.log_k1_deriv(eta) + s_sum
        if B > 0:
            gap = abs(eta / (A / B) - 1.0)
            gaps.append(gap)
            if gap < tol:
                break
        else:
            gaps.append(float("inf"))
    return A, B, gaps


def update_eta_approx(state: ChainState, spec: ModelSpec, rng,
                      health: Optional[ChainHealth] = None) -> float:
    """Approximate Gibbs step for eta: refine (A, B), then draw Gamma(A, B).

    If the rate stays nonpositive after the full refinement budget the
    update is skipped (eta retained) and the diagnostic counter bumps.
    """
    gen = as_generator(rng)
    a, b = spec.penalty.eta_prior
    n = state.sigma.size
    s_sum = 0.5 * float(np.sum(state.sigma / state.rho2 + state.rho2 / state.sigma))
    A, B, _ = refine_eta_gamma_params(
        a, b, s_sum, n, spec.eta_inner_iters, spec.eta_tol, state.eta
    )
    if not (B > 0 and A > 0):
        if health is not None:
            health.eta_update_skips += 1
        return state.eta
    return float(gen.gamma(A) / B)


def _clamp_positive(arr_or_val, health: ChainHealth):
    clipped = np.maximum(arr_or_val, _POSITIVITY_FLOOR)
    health.positivity_clamps += int(np.sum(arr_or_val < _POSITIVITY_FLOOR))
    return clipped


def run_chain(data: Dataset, spec: ModelSpec, rng=None) -> PosteriorSamples:
    """Run one systematic-scan chain and collect thinned post-burn-in draws.

    Scan order: beta, sigma, v, penalty block, rho2, eta.  Retains
    floor((n_iter - burn_in)/thin) rows of (beta, rho2, eta, penalty
    rates).  Deterministic given the stream (spec.seed when ``rng`` is
    not supplied).
    """
    gen = as_generator(rng) if rng is not None else RngStream(spec.seed).generator()
    state = initial_state(data, spec)
    health = ChainHealth()
    k = data.k

    beta_cols = [f"beta_{j}" for j in range(k)]
    if spec.is_lasso:
        columns = beta_cols + ["rho2", "eta", "lambda1_sq"]
    else:
        columns = beta_cols + ["rho2", "eta", "lambda3_tilde", "lambda4"]
    n_keep = (spec.n_iter - spec.burn_in) // spec.thin
    draws = np.empty((n_keep, len(columns)))
    row = 0

    for it in range(1, spec.n_iter + 1):
        block = "beta"
        try:
            state.beta = update_beta(state, data, spec, gen)
            block = "sigma"
            state.sigma = _clamp_positive(update_sigma(state, data, spec, gen), health)
            block = "v"
            state.v = _clamp_positive(update_v(state, data, spec, gen), health)
            if spec.is_lasso:
                block = "s"
                state.s = _clamp_positive(update_s(state, data, spec, gen), health)
                block = "lambda1_sq"
                if spec.fixed_lambda1_sq is None:
                    state.lam1_sq = update_lambda1_sq(state, data, spec, gen)
            else:
                block = "t"
                t_shift = _clamp_positive(
                    update_t(state, data, spec, gen) - 1.0, health
                )
                state.t = 1.0 + t_shift
                block = "lambda4"
                state.lam4 = update_lambda4(state, data, spec, gen)
                block = "lambda3_tilde"
                if spec.fixed_lambda3_tilde is None:
                    state.lam3_tilde = mh_update_lambda3_tilde(
                        state, data, spec, gen, health
                    )
            block = "rho2"
            state.rho2 = float(_clamp_positive(update_rho2(state, data, spec, gen), health))
            block = "eta"
            state.eta = update_eta_approx(state, spec, gen, health)
        except Exception as exc:
            raise ChainError(f"update '{block}' failed at iteration {it}: {exc}") from exc

        if it > spec.burn_in and (it - spec.burn_in) % spec.thin == 0 and row < n_keep:
            if spec.is_lasso:
                tail = (state.rho2, state.eta, state.lam1_sq)
            else:
                tail = (state.rho2, state.eta, state.lam3_tilde, state.lam4)
            draws[row, :k] = state.beta
            draws[row, k:] = tail
            row += 1

    return PosteriorSamples(draws=draws, columns=columns, health=health)


def summarize(samples: PosteriorSamples, level: float = 0.95):
    """Column-wise median and equal-tailed interval at the given level.

    Returns a list of (name, median, lower, upper) tuples.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    if samples.draws.shape[0] < 2:
        raise ValueError("need at least 2 retained draws to summarise")
    alpha = (1.0 - level) / 2.0
    med = np.median(samples.draws, axis=0)
    lo = np.quantile(samples.draws, alpha, axis=0)
    hi = np.quantile(samples.draws, 1.0 - alpha, axis=0)
    return [
        (name, float(m), float(lw), float(up))
        for name, m, lw, up in zip(samples.columns, med, lo, hi)
    ]
