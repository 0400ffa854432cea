"""Loss kernels, the asymmetric Huberised density, and log-posterior surfaces.

The loss family interpolates between square-root-check and check losses
through a robustness parameter eta and a scale rho2.  The matching
density has its tau-th quantile exactly at the location parameter and
admits a normal scale-mixture representation (exponential mixing on the
normal's latent mean/variance scale, generalised inverse Gaussian mixing
on the global scale); :func:`scale_mixture_density` evaluates that
representation by nested quadrature and serves as the independent oracle
for the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp
from scipy.integrate import quad

__all__ = [
    "LossParams",
    "huber_loss",
    "soft_huber",
    "nonconvex_huber",
    "hyperbolic_loss",
    "check_loss",
    "asym_loss",
    "asym_density",
    "asym_log_density",
    "scale_mixture_density",
    "LassoPenalty",
    "ElasticNetPenalty",
    "PosteriorGridSpec",
    "joint_log_posterior",
    "log_posterior_grid",
    "count_strict_local_maxima",
]

# K_0 has a log singularity at 0; grid points that interpolate the data
# exactly are clamped here before the log is taken.
_K0_ARG_FLOOR = 1e-300


@dataclass(frozen=True)
class LossParams:
    """Shape eta > 0, scale rho2 > 0, quantile level tau in (0,1).

    delta is the threshold of the classic quadratic/linear Huber loss
    used by the prediction-error metrics.
    """

    eta: float
    rho2: float
    tau: float
    delta: float = 1.345

    def __post_init__(self):
        if not (self.eta > 0 and self.rho2 > 0 and self.delta > 0):
            raise ValueError("eta, rho2 and delta must be > 0")
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie in (0, 1)")


def huber_loss(x, delta: float = 1.345):
    """Quadratic below delta, linear beyond: x^2/2 or delta(|x| - delta/2)."""
    if delta <= 0:
        raise ValueError("delta must be > 0")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    return np.where(ax <= delta, 0.5 * x * x, delta * (ax - 0.5 * delta))


def soft_huber(x, zeta1, zeta2):
    """sqrt(zeta1*zeta2) (sqrt(1 + x^2/zeta2) - 1); bridges L2 and L1."""
    if zeta1 <= 0 or zeta2 <= 0:
        raise ValueError("zeta1 and zeta2 must be > 0")
    x = np.asarray(x, dtype=float)
    z = x * x / zeta2
    # sqrt(1+z)-1 written division-free in z to avoid cancellation
    return np.sqrt(zeta1 * zeta2) * (z / (np.sqrt(1.0 + z) + 1.0))


def nonconvex_huber(x, zeta1, zeta2):
    """sqrt(zeta1*zeta2) (sqrt(1 + |x|/zeta2) - 1); bridges L1 and L1/2."""
    if zeta1 <= 0 or zeta2 <= 0:
        raise ValueError("zeta1 and zeta2 must be > 0")
    x = np.asarray(x, dtype=float)
    z = np.abs(x) / zeta2
    return np.sqrt(zeta1 * zeta2) * (z / (np.sqrt(1.0 + z) + 1.0))


def hyperbolic_loss(x, eta, rho2):
    """sqrt(eta (eta + x^2/rho2)) - eta; equals soft_huber under
    eta = sqrt(zeta1 zeta2), rho2 = sqrt(zeta2/zeta1)."""
    if eta <= 0 or rho2 <= 0:
        raise ValueError("eta and rho2 must be > 0")
    x = np.asarray(x, dtype=float)
    z = x * x / (eta * rho2)
    return eta * (z / (np.sqrt(1.0 + z) + 1.0))


def check_loss(x, tau):
    """Canonical quantile loss x (tau - 1{x < 0}); nonnegative."""
    x = np.asarray(x, dtype=float)
    return x * (tau - (x < 0))


def asym_loss(x, p: LossParams):
    """Asymmetric Huberised loss sqrt(eta (eta + check_loss(x, tau)/rho2)) - eta.

    Zero at x = 0 and increasing in |x| on each side; the radicand is
    bounded below by eta^2 because the check loss is nonnegative.
    """
    x = np.asarray(x, dtype=float)
    xi = check_loss(x, p.tau)
    assert np.all(xi >= 0.0)
    z = xi / (p.eta * p.rho2)
    return p.eta * (z / (np.sqrt(1.0 + z) + 1.0))


def asym_log_density(x, mu, p: LossParams):
    """log of :func:`asym_density`."""
    x = np.asarray(x, dtype=float)
    log_const = (
        math.log(p.eta * p.tau * (1.0 - p.tau))
        - math.log(2.0 * p.rho2 * (p.eta + 1.0))
    )
    return log_const - asym_loss(x - mu, p)


def asym_density(x, mu, p: LossParams):
    """Density with tau-th quantile at mu:

        eta tau (1-tau) e^eta / (2 rho2 (eta+1))
            * exp(-sqrt(eta (eta + check_loss(x - mu, tau)/rho2))).

    Integrates to 1; P(X <= mu) = tau.
    """
    return np.exp(asym_log_density(x, mu, p))


def _ald_kernel_density(e, scale, tau):
    """Asymmetric Laplace density tau(1-tau)/scale * exp(-check_loss(e/scale, tau))."""
    return tau * (1.0 - tau) / scale * np.exp(-check_loss(np.asarray(e) / scale, tau))


def scale_mixture_density(x, mu, p: LossParams, rel_tol: float = 1e-9) -> float:
    """Evaluate the normal scale-mixture representation by 2-D quadrature.

    Composes, for e = x - mu,

        int int N(e; (1-2 tau) v, 4 v sigma) Exp(v; tau(1-tau)/(2 sigma))
                GIG(sigma; 3/2, sqrt(eta/rho2), sqrt(eta rho2)) dv dsigma.

    The inner v-integral runs over log v for stability (the integrand
    spans many decades in v); the outer sigma-integral likewise.  The
    GIG mixing index is 3/2: composing the inner normal-exponential
    layer yields an asymmetric Laplace with scale 2*sigma, and only the
    3/2 index turns the remaining Bessel factor into the pure
    exponential kernel of :func:`asym_density` (the density's
    normalising constant, with its eta+1 factor, pins the same index).

    Slow; intended as an independent cross-check of the closed form,
    not for bulk evaluation.
    """
    e = float(x) - float(mu)
    tau, eta, rho2 = p.tau, p.eta, p.rho2
    c2 = eta / rho2
    d2 = eta * rho2
    nu_mix = 1.5
    # log of the GIG(3/2, c, d) normalising constant
    cd = math.sqrt(c2 * d2)
    log_norm = (
        0.5 * nu_mix * (math.log(c2) - math.log(d2))
        - math.log(2.0)
        - (np.log(_sp.kve(nu_mix, cd)) - cd)
    )
    rate_coeff = tau * (1.0 - tau) / 2.0  # rate of v given sigma is this / sigma

    def inner(sigma: float) -> float:
        # int N(e; (1-2tau) v, 4 v sigma) * Exp(v; rate) dv over log v
        rate = rate_coeff / sigma
        # characteristic v scales: exponential scale and the scale where the
        # normal kernel stops suppressing small v
        v_scale = max(1.0 / rate, e * e / sigma, sigma, 1e-300)

        def f(u: float) -> float:
            v = math.exp(u)
            resid = e - (1.0 - 2.0 * tau) * v
            var = 4.0 * v * sigma
            logn = -0.5 * math.log(2.0 * math.pi * var) - resid * resid / (2.0 * var)
            logexp = math.log(rate) - rate * v
            return math.exp(logn + logexp + u)

        lo = math.log(v_scale) - 46.0
        hi = math.log(v_scale) + 46.0
        val, _ = quad(f, lo, hi, epsabs=1e-14, epsrel=rel_tol, limit=200)
        return val

    def outer(w: float) -> float:
        sigma = math.exp(w)
        log_gig = (
            log_norm
            + (nu_mix - 1.0) * w
            - 0.5 * (c2 * sigma + d2 / sigma)
        )
        return inner(sigma) * math.exp(log_gig + w)

    s_scale = math.sqrt(d2 / c2)  # = rho2, the GIG scale
    lo = math.log(s_scale) - 42.0
    hi = math.log(s_scale) + 42.0
    val, err = quad(outer, lo, hi, epsabs=1e-14, epsrel=rel_tol, limit=200)
    if not np.isfinite(val) or (val > 0 and err > 1e-3 * val):
        raise RuntimeError(f"mixture quadrature failed to converge: value={val}, err={err}")
    return val


# --- joint log-posterior surfaces for the mode-counting demonstration --------


@dataclass(frozen=True)
class LassoPenalty:
    lambda1: float

    def __post_init__(self):
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be > 0")


@dataclass(frozen=True)
class ElasticNetPenalty:
    lambda3: float
    lambda4: float

    def __post_init__(self):
        if self.lambda3 <= 0 or self.lambda4 <= 0:
            raise ValueError("lambda3 and lambda4 must be > 0")


@dataclass(frozen=True)
class PosteriorGridSpec:
    """Grid evaluation plan for the joint (beta, rho2) posterior surface.

    prior_style 'conditional' scales the coefficient prior by the
    current rho2 (provably single-moded surface); 'unconditional' keeps
    the prior fixed (can split into several modes).
    """

    beta_grid: np.ndarray
    rho2_grid: np.ndarray
    x: np.ndarray
    y: np.ndarray
    penalty: object
    prior_style: str
    eta: float
    tau: float

    def __post_init__(self):
        for name in ("beta_grid", "rho2_grid"):
            g = np.asarray(getattr(self, name), dtype=float)
            if g.ndim != 1 or g.size < 2 or np.any(np.diff(g) <= 0):
                raise ValueError(f"{name} must be strictly increasing, length >= 2")
            object.__setattr__(self, name, g)
        if np.any(self.rho2_grid <= 0):
            raise ValueError("rho2_grid must be positive")
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[1] != 1:
            raise ValueError("grid evaluation expects a single-column design")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.prior_style not in ("conditional", "unconditional"):
            raise ValueError("prior_style must be 'conditional' or 'unconditional'")
        if not (self.eta > 0 and 0.0 < self.tau < 1.0):
            raise ValueError("need eta > 0 and tau in (0, 1)")


def _log_k0(arg: np.ndarray) -> np.ndarray:
    arg = np.maximum(arg, _K0_ARG_FLOOR)
    return np.log(_sp.k0e(arg)) - arg


def joint_log_posterior(beta, rho2: float, spec: PosteriorGridSpec) -> float:
    """Unnormalised log posterior of (beta, rho2) with latents integrated out.

    The likelihood part is a product of Bessel-K_0 factors in the scaled
    one-sided residuals; the prior part depends on spec.penalty and
    spec.prior_style.
    """
    if rho2 <= 0:
        raise ValueError("rho2 must be > 0")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    n = spec.y.size
    k = beta.size
    resid = spec.y - spec.x @ beta
    w = np.abs(resid) + (1.0 - 2.0 * spec.tau) * resid
    # the eta^2 floor comes from the 1/sigma coefficient of the mixing
    # prior; it keeps the Bessel argument >= eta, so the surface has no
    # residual-interpolation singularities
    args = np.sqrt(spec.eta**2 + (spec.eta / rho2) * w / 2.0)
    loglik = float(np.sum(_log_k0(args)))

    pen = spec.penalty
    if spec.prior_style == "unconditional":
        logprior = -(n + 1.0) * math.log(rho2)
        if isinstance(pen, LassoPenalty):
            logprior -= pen.lambda1 * np.sum(np.abs(beta))
        else:
            logprior -= pen.lambda3 * np.sum(np.abs(beta)) + pen.lambda4 * np.sum(beta**2)
    else:
        logprior = -(n + k / 2.0 + 1.0) * math.log(rho2)
        if isinstance(pen, LassoPenalty):
            logprior -= pen.lambda1 * np.sum(np.abs(beta)) / math.sqrt(rho2)
        else:
            logprior -= (
                pen.lambda3 * np.sum(np.abs(beta)) / math.sqrt(rho2)
                + pen.lambda4 * np.sum(beta**2) / rho2
            )
    return loglik + logprior


def log_posterior_grid(spec: PosteriorGridSpec) -> np.ndarray:
    """Evaluate :func:`joint_log_posterior` over the (beta, rho2) grid.

    Returns an array of shape (len(beta_grid), len(rho2_grid)).
    Vectorised: the Bessel argument factorises into a residual part and
    a 1/sqrt(rho2) part.
    """
    beta = spec.beta_grid
    rho2 = spec.rho2_grid
    n = spec.y.size
    resid = spec.y[None, :] - beta[:, None] * spec.x[:, 0][None, :]  # (B, n)
    w = np.abs(resid) + (1.0 - 2.0 * spec.tau) * resid
    half_eta_w = np.maximum(spec.eta * w / 2.0, 0.0)
    args = np.sqrt(spec.eta**2 + half_eta_w[:, :, None] / rho2[None, None, :])
    loglik = _log_k0(args).sum(axis=1)  # (B, R)

    pen = spec.penalty
    abs_b = np.abs(beta)
    log_r = np.log(rho2)
    if spec.prior_style == "unconditional":
        if isinstance(pen, LassoPenalty):
            prior_b = -pen.lambda1 * abs_b
        else:
            prior_b = -pen.lambda3 * abs_b - pen.lambda4 * beta**2
        prior = prior_b[:, None] - (n + 1.0) * log_r[None, :]
    else:
        inv_sqrt_r = 1.0 / np.sqrt(rho2)
        if isinstance(pen, LassoPenalty):
            prior = -pen.lambda1 * abs_b[:, None] * inv_sqrt_r[None, :]
        else:
            prior = (
                -pen.lambda3 * abs_b[:, None] * inv_sqrt_r[None, :]
                - pen.lambda4 * (beta**2)[:, None] / rho2[None, :]
            )
        # single-column design, so k = 1 in the rho2 exponent
        prior = prior - (n + 0.5 + 1.0) * log_r[None, :]
    return loglik + prior


def count_strict_local_maxima(z: np.ndarray) -> int:
    """Count interior grid cells strictly greater than all 8 neighbours.

    Boundary cells are never counted: the surface continues past the
    grid window, so an edge cell cannot be certified as a maximum.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[0] < 3 or z.shape[1] < 3:
        return 0
    core = z[1:-1, 1:-1]
    best_neighbor = np.full_like(core, -np.inf)
    for di in (0, 1, 2):
        for dj in (0, 1, 2):
            if di == 1 and dj == 1:
                continue
            shifted = z[di : di + core.shape[0], dj : dj + core.shape[1]]
            best_neighbor = np.maximum(best_neighbor, shifted)
    return int(np.sum(core > best_neighbor))
