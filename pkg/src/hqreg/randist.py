"""Reproducible random-variate generation for the samplers and simulators.

The generalised inverse Gaussian (GIG) sampler is the workhorse: every
latent block of the Gibbs scans is GIG-distributed.  It implements the
uniformly fast rejection algorithm of Devroye (2014, Stat. Comput. 24),
vectorised over parameter arrays, with gamma / inverse-gamma dispatch at
the degenerate boundaries.

Streams are derived from (seed, key-path) pairs via numpy's SeedSequence
spawning, so parallel replications are reproducible regardless of
scheduling: unit of work (rep r, stage s) always draws from
``RngStream(seed).child(r, s)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

from . import specfun

__all__ = [
    "RngStream",
    "as_generator",
    "GigParams",
    "GIG_BOUNDARY_EPS",
    "gig_sample",
    "gig_sample_shifted",
    "gig_rvs",
    "gig_moment",
    "mvn_from_precision",
    "ald_sample",
    "Gaussian",
    "ContaminatedNormal",
    "SkewT",
    "Cauchy",
    "Mixture",
    "NoiseLaw",
    "noise_sample",
    "FactorizationError",
]

# Below this value of c*d the Bessel-ratio regime is numerically void and
# draws dispatch to the gamma (nu > 0) or inverse-gamma (nu < 0) limit.
GIG_BOUNDARY_EPS = 1e-12


class FactorizationError(RuntimeError):
    """Raised when a precision matrix is numerically indefinite."""


@dataclass(frozen=True)
class RngStream:
    """Seed plus key path identifying one independent random stream.

    Identical (seed, key) pairs reproduce draw sequences bit for bit;
    distinct keys give statistically independent streams.
    """

    seed: int
    key: tuple = field(default=())

    def child(self, *subkey: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(k) for k in subkey))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=self.key)
        return np.random.default_rng(ss)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, or a plain int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot interpret {type(rng).__name__} as a random stream")


@dataclass(frozen=True)
class GigParams:
    """Parameters of the density proportional to x^(nu-1) exp(-(c^2 x + d^2/x)/2).

    c and d enter squared, i.e. they are the square roots of the
    quadratic-form coefficients.  Degenerate boundaries: d = 0 needs
    nu > 0 (gamma limit), c = 0 needs nu < 0 (inverse-gamma limit).
    """

    nu: float
    c: float
    d: float

    def __post_init__(self):
        if not (np.isfinite(self.nu) and np.isfinite(self.c) and np.isfinite(self.d)):
            raise ValueError("GigParams must be finite")
        if self.c < 0 or self.d < 0:
            raise ValueError("GigParams requires c >= 0 and d >= 0")
        if self.c == 0 and self.d == 0:
            raise ValueError("GigParams requires c > 0 or d > 0")
        if self.d == 0 and self.nu <= 0:
            raise ValueError("gamma limit (d = 0) requires nu > 0")
        if self.c == 0 and self.nu >= 0:
            raise ValueError("inverse-gamma limit (c = 0) requires nu < 0")


def _devroye_gig_two_param(gen: np.random.Generator, lam: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Draw from the two-parameter GIG density ~ y^(lam-1) exp(-omega (y + 1/y)/2).

    Requires lam >= 0 and omega > 0 elementwise.  Rejection from a
    three-piece hat around the mode of the log-transformed density;
    expected number of rounds is bounded (< 2) uniformly in (lam, omega).
    """
    lam = np.asarray(lam, dtype=float)
    omega = np.asarray(omega, dtype=float)
    alpha = np.sqrt(omega * omega + lam * lam) - lam

    def psi(x):
        return -alpha * (np.cosh(x) - 1.0) - lam * (np.expm1(x) - x)

    def dpsi(x):
        return -alpha * np.sinh(x) - lam * np.expm1(x)

    one = np.ones_like(alpha)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        m = -psi(one)
        t = np.where(
            (m >= 0.5) & (m <= 2.0),
            1.0,
            np.where(m > 2.0, np.sqrt(2.0 / (alpha + lam)), np.log(4.0 / (alpha + 2.0 * lam))),
        )
        m = -psi(-one)
        s_small = np.minimum(
            1.0 / lam,
            np.log1p(1.0 / alpha + np.sqrt(1.0 / (alpha * alpha) + 2.0 / alpha)),
        )
        s = np.where(
            (m >= 0.5) & (m <= 2.0),
            1.0,
            np.where(m > 2.0, np.sqrt(4.0 / (alpha * np.cosh(1.0) + lam)), s_small),
        )

    eta = -psi(t)
    zeta = -dpsi(t)
    theta = -psi(-s)
    xi = dpsi(-s)
    p = 1.0 / xi
    r = 1.0 / zeta
    td = t - r * eta
    sd = s - p * theta
    q = td + sd
    total = p + q + r

    out = np.empty_like(alpha)
    pending = np.arange(alpha.size)
    al_f = alpha.ravel()
    lam_f = lam.ravel()
    t_f = t.ravel()
    s_f = s.ravel()
    eta_f = eta.ravel()
    zeta_f = zeta.ravel()
    theta_f = theta.ravel()
    xi_f = xi.ravel()
    p_f = p.ravel()
    r_f = r.ravel()
    td_f = td.ravel()
    sd_f = sd.ravel()
    q_f = q.ravel()
    tot_f = total.ravel()
    out_f = out.ravel()

    while pending.size:
        u = gen.random(pending.size)
        v = gen.random(pending.size)
        w = gen.random(pending.size)
        pp, qq, rr = p_f[pending], q_f[pending], r_f[pending]
        tt, ss = t_f[pending], s_f[pending]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            cand = np.where(
                u < qq / tot_f[pending],
                -sd_f[pending] + qq * v,
                np.where(
                    u < (qq + rr) / tot_f[pending],
                    td_f[pending] - rr * np.log(v),
                    -sd_f[pending] + pp * np.log(v),
                ),
            )
            # hat value: 1 on the flat middle piece, exponential tails outside
            upper = np.where(
                cand > td_f[pending],
                np.exp(-eta_f[pending] - zeta_f[pending] * (cand - tt)),
                np.where(
                    cand < -sd_f[pending],
                    np.exp(-theta_f[pending] + xi_f[pending] * (cand + ss)),
                    1.0,
                ),
            )
            a_p = al_f[pending]
            l_p = lam_f[pending]
            logf = -a_p * (np.cosh(cand) - 1.0) - l_p * (np.expm1(cand) - cand)
            # non-finite candidates (a zero uniform hit an exponential tail)
            # carry no mass; redraw them
            acc = (np.log(w) + np.log(upper) <= logf) & np.isfinite(cand)
        idx = pending[acc]
        out_f[idx] = cand[acc]
        pending = pending[~acc]

    # undo the log / mode-centering transform
    return np.exp(out) * (lam / omega + np.sqrt(1.0 + (lam / omega) ** 2))


def gig_rvs(rng, nu, c, d, size=None) -> np.ndarray:
    """Vectorised GIG sampling; nu, c, d broadcast against each other.

    Density proportional to x^(nu-1) exp(-(c^2 x + d^2 / x) / 2).
    Boundary dispatch: d = 0 (or c*d below GIG_BOUNDARY_EPS with nu > 0)
    draws Gamma(nu, rate c^2/2); the mirrored case draws the
    inverse-gamma limit.
    """
    gen = as_generator(rng)
    nu = np.asarray(nu, dtype=float)
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if size is None:
        shape = np.broadcast_shapes(nu.shape, c.shape, d.shape)
    else:
        shape = (size,) if np.isscalar(size) else tuple(size)
    nu_b = np.broadcast_to(nu, shape).astype(float)
    c_b = np.broadcast_to(c, shape).astype(float)
    d_b = np.broadcast_to(d, shape).astype(float)

    if np.any(c_b < 0) or np.any(d_b < 0) or not (
        np.all(np.isfinite(nu_b)) and np.all(np.isfinite(c_b)) and np.all(np.isfinite(d_b))
    ):
        raise ValueError("GIG parameters must be finite with c >= 0, d >= 0")
    if np.any((c_b == 0) & (d_b == 0)):
        raise ValueError("GIG parameters need c > 0 or d > 0")

    omega = c_b * d_b
    gamma_lim = (d_b == 0) | ((omega < GIG_BOUNDARY_EPS) & (nu_b > 0))
    invgamma_lim = (c_b == 0) | ((omega < GIG_BOUNDARY_EPS) & (nu_b < 0))
    invgamma_lim &= ~gamma_lim
    general = ~(gamma_lim | invgamma_lim)

    if np.any(gamma_lim & (nu_b <= 0)):
        raise ValueError("gamma limit (d = 0) requires nu > 0")
    if np.any(invgamma_lim & (nu_b >= 0)):
        raise ValueError("inverse-gamma limit (c = 0) requires nu < 0")

    out = np.empty(shape, dtype=float)
    # fixed mask order keeps the draw sequence reproducible
    if np.any(gamma_lim):
        nus = nu_b[gamma_lim]
        cs = c_b[gamma_lim]
        out[gamma_lim] = gen.gamma(nus) * (2.0 / (cs * cs))
    if np.any(invgamma_lim):
        nus = nu_b[invgamma_lim]
        ds = d_b[invgamma_lim]
        out[invgamma_lim] = (ds * ds) / (2.0 * gen.gamma(-nus))
    if np.any(general):
        nug = nu_b[general]
        og = omega[general]
        y = _devroye_gig_two_param(gen, np.abs(nug), og)
        neg = nug < 0
        y[neg] = 1.0 / y[neg]
        out[general] = y * (d_b[general] / c_b[general])
    if size is None and out.shape == ():
        return float(out)
    return out


def gig_sample(rng, params: GigParams, size=None):
    """One draw (or ``size`` draws) from the GIG law given by ``params``."""
    out = gig_rvs(rng, params.nu, params.c, params.d, size=size)
    if size is None:
        return float(np.asarray(out).reshape(()))
    return out


def gig_sample_shifted(rng, params: GigParams, size=None):
    """1 + X with X ~ GIG(params); the return value is strictly > 1.

    Used for latents supported on (1, inf) whose shifted value follows a
    plain GIG law.
    """
    return 1.0 + gig_rvs(rng, params.nu, params.c, params.d, size=size)


def gig_moment(params: GigParams, order: float) -> float:
    """E[X^order] for X ~ GIG(params), via scaled Bessel ratios.

    Only valid away from the degenerate boundaries (c > 0 and d > 0).
    """
    if params.c <= 0 or params.d <= 0:
        raise ValueError("moments via Bessel ratios need c > 0 and d > 0")
    w = params.c * params.d
    log_ratio = specfun.log_bessel_k(params.nu + order, w) - specfun.log_bessel_k(params.nu, w)
    return (params.d / params.c) ** order * np.exp(log_ratio)


def mvn_from_precision(rng, precision, linear_term) -> np.ndarray:
    """Draw from N(P^-1 h, P^-1) given precision P and linear term h.

    One Cholesky factorisation plus triangular solves; the covariance is
    never formed explicitly.
    """
    gen = as_generator(rng)
    precision = np.asarray(precision, dtype=float)
    h = np.asarray(linear_term, dtype=float)
    try:
        lower = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"precision matrix is not positive definite: {exc}") from exc
    half = solve_triangular(lower, h, lower=True)
    mean = solve_triangular(lower.T, half, lower=False)
    z = gen.standard_normal(h.shape[0])
    return mean + solve_triangular(lower.T, z, lower=False)


def ald_sample(rng, mu, sigma, tau, size=None):
    """Asymmetric Laplace draw with density (tau(1-tau)/sigma) exp(-rho_tau((x-mu)/sigma)).

    P(X <= mu) = tau exactly.  Constructed as mu + sigma (E1/tau - E2/(1-tau))
    with independent unit exponentials.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must lie in (0, 1)")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    gen = as_generator(rng)
    e1 = gen.exponential(size=size)
    e2 = gen.exponential(size=size)
    return mu + sigma * (e1 / tau - e2 / (1.0 - tau))


# --- noise laws for the simulation scenarios ---------------------------------


@dataclass(frozen=True)
class Gaussian:
    """N(0, sd^2)."""

    sd: float = 1.0

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be > 0")


@dataclass(frozen=True)
class ContaminatedNormal:
    """(1-w) N(0,1) + w N(0, s^2)."""

    w: float
    s: float

    def __post_init__(self):
        if not (0.0 <= self.w <= 1.0):
            raise ValueError("contamination weight must lie in [0, 1]")
        if self.s <= 0:
            raise ValueError("contamination scale must be > 0")

    @property
    def sd(self) -> float:
        """Analytic standard deviation of the mixture."""
        return float(np.sqrt((1.0 - self.w) + self.w * self.s**2))


@dataclass(frozen=True)
class SkewT:
    """Two-piece skewed Student t: scale gamma on the positive half, 1/gamma on the negative."""

    df: float
    gamma: float

    def __post_init__(self):
        if self.df <= 0 or self.gamma <= 0:
            raise ValueError("df and gamma must be > 0")


@dataclass(frozen=True)
class Cauchy:
    """Standard Cauchy(0, 1)."""


@dataclass(frozen=True)
class Mixture:
    """Finite mixture of noise laws; weights must be positive and sum to 1."""

    components: tuple

    def __post_init__(self):
        weights = np.array([w for w, _ in self.components], dtype=float)
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")


NoiseLaw = Union[Gaussian, ContaminatedNormal, SkewT, Cauchy, Mixture]


def _skewt_rvs(gen: np.random.Generator, df: float, gamma: float, n: int) -> np.ndarray:
    t = np.abs(gen.standard_t(df, size=n))
    pos = gen.random(n) < gamma**2 / (1.0 + gamma**2)
    return np.where(pos, gamma * t, -t / gamma)


def noise_sample(rng, law: NoiseLaw, size=None):
    """Draw from a noise law; mixtures pick a component by weight, then sample it."""
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    if isinstance(law, Gaussian):
        out = law.sd * gen.standard_normal(n)
    elif isinstance(law, ContaminatedNormal):
        contaminated = gen.random(n) < law.w
        z = gen.standard_normal(n)
        out = np.where(contaminated, law.s * z, z)
    elif isinstance(law, SkewT):
        out = _skewt_rvs(gen, law.df, law.gamma, n)
    elif isinstance(law, Cauchy):
        out = gen.standard_cauchy(n)
    elif isinstance(law, Mixture):
        weights = np.array([w for w, _ in law.components])
        which = gen.choice(len(law.components), size=n, p=weights)
        out = np.empty(n)
        for j, (_, sub) in enumerate(law.components):
            idx = np.flatnonzero(which == j)
            if idx.size:
                out[idx] = noise_sample(gen, sub, size=idx.size)
    else:
        raise ValueError(f"unknown noise law: {law!r}")
    if size is None:
        return float(out[0])
    return out
