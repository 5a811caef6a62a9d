"""Parametrized CRM rate measures and series-representation samplers.

A rate measure is described by its density, its tail mass, a tractable
proposal with closed-form tail inverse, and the density ratio used by the
rejection representation. Ordered rate sequences are generated either
directly from the rejection representation (keeping rejected zeros) or,
for the inverse-Levy law, by running the rejection representation until
the requested number of nonzero rates has appeared.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy import special

from .errors import NonTerminationError, ParameterError

MAX_REJECTION_ITERS_PER_RATE = 10_000_000
_INV_REL_TOL = 1e-12
_QUAD_ABS_TOL = 1e-10


class Family(enum.Enum):
    BETA_PROCESS = "beta_process"
    GAMMA_PROCESS = "gamma_process"
    CUSTOM = "custom"


class Representation(enum.Enum):
    REJECTION_RAW = "rejection_raw"
    INVERSE_LEVY = "inverse_levy"


class RateMeasureSpec:
    """A rate measure plus the proposal machinery for rejection sampling.

    All callables accept and return numpy arrays (or scalars). The proposal
    must dominate the target so that ``accept_ratio`` is uniformly <= 1.
    """

    def __init__(self, family, params, nu_density, nu_tail, proposal_tail,
                 proposal_tail_inverse, accept_ratio, nu_tail_inverse=None,
                 support_upper=np.inf, small_rate_exponent=None):
        self.family = family
        self.params = dict(params)
        self._nu_density = nu_density
        self._nu_tail = nu_tail
        self._proposal_tail = proposal_tail
        self._proposal_tail_inverse = proposal_tail_inverse
        self._accept_ratio = accept_ratio
        self._nu_tail_inverse = nu_tail_inverse
        self.support_upper = float(support_upper)
        # exponent a in nu(dx) ~ x^{-1-a} near 0, used to regularize quadrature
        self.small_rate_exponent = small_rate_exponent

    def nu_density(self, theta):
        return self._nu_density(np.asarray(theta, dtype=np.float64))

    def nu_tail(self, x):
        return self._nu_tail(np.asarray(x, dtype=np.float64))

    def proposal_tail(self, x):
        return self._proposal_tail(np.asarray(x, dtype=np.float64))

    def proposal_tail_inverse(self, u):
        return self._proposal_tail_inverse(np.asarray(u, dtype=np.float64))

    def accept_ratio(self, theta):
        return self._accept_ratio(np.asarray(theta, dtype=np.float64))

    def nu_tail_inverse(self, u):
        if self._nu_tail_inverse is not None:
            return self._nu_tail_inverse(np.asarray(u, dtype=np.float64))
        return self._bisect_tail_inverse(np.asarray(u, dtype=np.float64))

    def _bisect_tail_inverse(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if np.any(u <= 0):
            raise ParameterError("tail inverse requires u > 0")
        if math.isfinite(self.support_upper):
            hi = np.full_like(u, self.support_upper)
        else:
            hi = np.ones_like(u)
            for _ in range(2000):
                mask = self.nu_tail(hi) > u
                if not np.any(mask):
                    break
                hi[mask] *= 2.0
        lo = np.full_like(u, np.finfo(np.float64).tiny)
        # shrink lo up toward the solution so bisection starts bracketed tightly
        probe = np.minimum(hi * 0.5, np.full_like(u, 1e-12))
        mask = self.nu_tail(probe) > u
        lo[mask] = probe[mask]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            t = self.nu_tail(mid)
            gt = t > u
            lo = np.where(gt, mid, lo)
            hi = np.where(gt, hi, mid)
            if np.all(hi - lo <= _INV_REL_TOL * np.maximum(lo, np.finfo(np.float64).tiny)):
                break
        out = 0.5 * (lo + hi)
        return out if out.shape else float(out)

    def _key(self):
        return (self.family, tuple(sorted(self.params.items())))

    def __repr__(self):
        return f"RateMeasureSpec({self.family.value}, {self.params})"


@dataclass(frozen=True)
class TruncatedCRM:
    """Ordered rates with their Poisson-arrival coordinates.

    For REJECTION_RAW, ``gammas`` are the raw proposal arrival coordinates
    and ``rates`` may contain zeros at rejected iterations. For
    INVERSE_LEVY, ``rates`` are the first nonzero rejection rates (strictly
    decreasing) and ``gammas[k] = nu_tail(rates[k])``.
    """

    rates: np.ndarray
    gammas: np.ndarray
    representation: Representation
    measure: RateMeasureSpec
    seed: int

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=np.float64)
        gammas = np.asarray(self.gammas, dtype=np.float64)
        rates.setflags(write=False)
        gammas.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "gammas", gammas)
        if rates.shape != gammas.shape:
            raise ParameterError("rates and gammas must have equal length")
        if gammas.size and np.any(np.diff(gammas) <= 0):
            raise ParameterError("arrival coordinates must be strictly increasing")
        if self.representation is Representation.INVERSE_LEVY:
            if np.any(rates <= 0):
                raise ParameterError("inverse-Levy rates must be strictly positive")
            if rates.size and np.any(np.diff(rates) >= 0):
                raise ParameterError("inverse-Levy rates must be strictly decreasing")

    @property
    def K(self):
        return int(self.rates.size)

    def nonzero_rates(self):
        return self.rates[self.rates > 0]


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------

def _beta_prime(gamma, lam, alpha):
    return gamma * math.exp(special.gammaln(lam + 1.0)
                            - special.gammaln(1.0 - alpha)
                            - special.gammaln(lam + alpha))


@lru_cache(maxsize=8192)
def _quad_tail_cached(key, x):
    family, params = key
    if family is Family.BETA_PROCESS:
        gamma, lam, alpha = dict(params)["gamma"], dict(params)["lam"], dict(params)["alpha"]
        gp = _beta_prime(gamma, lam, alpha)
        f = lambda t: gp * t ** (-1.0 - alpha) * (1.0 - t) ** (lam + alpha - 1.0)
        hi = 1.0
    else:
        raise ParameterError("quadrature tail fallback only wired for the beta family")
    val, _ = integrate.quad(f, x, hi, epsabs=_QUAD_ABS_TOL, epsrel=1e-12, limit=200)
    return val


def beta_tail_mass(x, gamma, lam, alpha):
    """Tail mass of the beta-process rate measure on [x, 1].

    Special-function closed forms (hyp2f1 for alpha = 0, an
    integration-by-parts betainc identity for alpha > 0 with
    lam + alpha > 1); validated against the adaptive-quadrature route.
    """
    gp = _beta_prime(gamma, lam, alpha)
    b = lam + alpha - 1.0
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    out[x >= 1.0] = 0.0
    inner = (x < 1.0)
    xi = np.clip(x[inner], np.finfo(np.float64).tiny, None)
    if alpha < 1e-8:
        z = 1.0 - xi
        out[inner] = gamma * z ** lam * special.hyp2f1(lam, 1.0, lam + 1.0, z)
    elif b > 0:
        ibeta = special.betainc(1.0 - alpha, b, xi)
        bfun = math.exp(special.gammaln(1.0 - alpha) + special.gammaln(b)
                        - special.gammaln(1.0 - alpha + b))
        out[inner] = gp * (xi ** (-alpha) * (1.0 - xi) ** b
                           - b * bfun * (1.0 - ibeta)) / alpha
    else:
        # lam + alpha == 1 exactly: nu is the pure power law
        out[inner] = gp * (xi ** (-alpha) - 1.0) / alpha
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def beta_process(gamma, lam, alpha):
    """Beta process rate measure BP(gamma, lam, alpha) on (0, 1].

    gamma > 0 is the mass, lam the concentration, alpha in [0,1) the
    discount. The power-law proposal requires lam + alpha >= 1 so that the
    density ratio (1-theta)^{lam+alpha-1} stays below one.
    """
    if not (gamma > 0):
        raise ParameterError("beta process requires mass gamma > 0")
    if not (0.0 <= alpha < 1.0):
        raise ParameterError("beta process requires discount alpha in [0, 1)")
    if lam + alpha < 1.0:
        raise ParameterError("beta process proposal requires lam + alpha >= 1")
    gp = _beta_prime(gamma, lam, alpha)
    b = lam + alpha - 1.0

    def nu_density(t):
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where((t > 0) & (t <= 1.0),
                           gp * t ** (-1.0 - alpha) * (1.0 - t) ** b, 0.0)
        return out

    def nu_tail(x):
        return beta_tail_mass(x, gamma, lam, alpha)

    if alpha < 1e-8:
        def proposal_tail(x):
            return -gp * np.log(np.clip(x, np.finfo(np.float64).tiny, 1.0))

        def proposal_tail_inverse(u):
            return np.exp(-np.asarray(u, dtype=np.float64) / gp)
    else:
        def proposal_tail(x):
            return gp * (np.clip(x, np.finfo(np.float64).tiny, 1.0) ** (-alpha) - 1.0) / alpha

        def proposal_tail_inverse(u):
            return (1.0 + alpha * np.asarray(u, dtype=np.float64) / gp) ** (-1.0 / alpha)

    def accept_ratio(t):
        return np.where((t > 0) & (t <= 1.0), (1.0 - t) ** b, 0.0)

    return RateMeasureSpec(Family.BETA_PROCESS,
                           {"gamma": gamma, "lam": lam, "alpha": alpha},
                           nu_density, nu_tail, proposal_tail,
                           proposal_tail_inverse, accept_ratio,
                           nu_tail_inverse=None, support_upper=1.0,
                           small_rate_exponent=alpha)


def gamma_process(gamma, lam, alpha):
    """Gamma process rate measure GP(gamma, lam, alpha) on (0, inf).

    gamma > 0 is the mass, lam > 0 the scale, alpha in [0,1) the discount.
    """
    if not (gamma > 0 and lam > 0):
        raise ParameterError("gamma process requires gamma > 0 and lam > 0")
    if not (0.0 <= alpha < 1.0):
        raise ParameterError("gamma process requires discount alpha in [0, 1)")
    cg = gamma * lam ** (1.0 - alpha) / math.gamma(1.0 - alpha)

    def nu_density(t):
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(t > 0, cg * t ** (-1.0 - alpha) * np.exp(-lam * t), 0.0)
        return out

    if alpha < 1e-8:
        def nu_tail(x):
            x = np.clip(np.asarray(x, dtype=np.float64), np.finfo(np.float64).tiny, None)
            return gamma * lam * special.exp1(lam * x)

        def proposal_tail(x):
            x = np.clip(np.asarray(x, dtype=np.float64), np.finfo(np.float64).tiny, None)
            return gamma * lam * np.log1p(1.0 / (lam * x))

        def proposal_tail_inverse(u):
            u = np.asarray(u, dtype=np.float64)
            return 1.0 / (lam * np.expm1(u / (gamma * lam)))

        def accept_ratio(t):
            return np.where(t > 0, (1.0 + lam * t) * np.exp(-lam * t), 0.0)
    else:
        g1 = math.gamma(1.0 - alpha)
        cg2 = gamma * lam ** (1.0 - alpha) / (alpha * g1)  # proposal mass coefficient

        def nu_tail(x):
            x = np.clip(np.asarray(x, dtype=np.float64), np.finfo(np.float64).tiny, None)
            y = lam * x
            return (gamma * lam / g1) * (y ** (-alpha) * np.exp(-y)
                                         - g1 * special.gammaincc(1.0 - alpha, y)) / alpha

        def proposal_tail(x):
            x = np.clip(np.asarray(x, dtype=np.float64), np.finfo(np.float64).tiny, None)
            return cg2 * x ** (-alpha)

        def proposal_tail_inverse(u):
            u = np.asarray(u, dtype=np.float64)
            return (cg2 / u) ** (1.0 / alpha)

        def accept_ratio(t):
            return np.where(t > 0, np.exp(-lam * t), 0.0)

    return RateMeasureSpec(Family.GAMMA_PROCESS,
                           {"gamma": gamma, "lam": lam, "alpha": alpha},
                           nu_density, nu_tail, proposal_tail,
                           proposal_tail_inverse, accept_ratio,
                           nu_tail_inverse=None, support_upper=np.inf,
                           small_rate_exponent=alpha)


def power_law_measure(mass, alpha, proposal_mass=None, proposal_alpha=None):
    """Power-law rate measure nu(dt) = mass * t^{-1-alpha} 1[t<=1] dt.

    Its tail inverse is available in closed form, which makes it the
    reference family for representation-equivalence checks and for the
    categorical-process bound. By default the measure is its own proposal
    (acceptance ratio identically 1); passing a dominating power-law
    proposal (proposal_mass >= mass, proposal_alpha >= alpha) exercises a
    genuine thinning.
    """
    if not (mass > 0):
        raise ParameterError("power-law measure requires mass > 0")
    if not (0.0 <= alpha < 1.0):
        raise ParameterError("power-law measure requires alpha in [0, 1)")
    pm = mass if proposal_mass is None else float(proposal_mass)
    pa = alpha if proposal_alpha is None else float(proposal_alpha)
    if pm < mass or pa < alpha:
        raise ParameterError("proposal must dominate: proposal_mass >= mass, proposal_alpha >= alpha")

    def _tail(c, a, x):
        x = np.clip(np.asarray(x, dtype=np.float64), np.finfo(np.float64).tiny, None)
        out = np.where(x >= 1.0, 0.0,
                       -c * np.log(np.minimum(x, 1.0)) if a < 1e-8
                       else c * (np.minimum(x, 1.0) ** (-a) - 1.0) / a)
        return out

    def _tail_inverse(c, a, u):
        u = np.asarray(u, dtype=np.float64)
        if a < 1e-8:
            return np.exp(-u / c)
        return (1.0 + a * u / c) ** (-1.0 / a)

    def nu_density(t):
        with np.errstate(divide="ignore"):
            return np.where((t > 0) & (t <= 1.0), mass * t ** (-1.0 - alpha), 0.0)

    def accept_ratio(t):
        r = (mass / pm) * np.asarray(t, dtype=np.float64) ** (pa - alpha)
        return np.where((t > 0) & (t <= 1.0), r, 0.0)

    return RateMeasureSpec(Family.CUSTOM,
                           {"kind": "power_law", "mass": mass, "alpha": alpha,
                            "proposal_mass": pm, "proposal_alpha": pa},
                           nu_density,
                           lambda x: _tail(mass, alpha, x),
                           lambda x: _tail(pm, pa, x),
                           lambda u: _tail_inverse(pm, pa, u),
                           accept_ratio,
                           nu_tail_inverse=lambda u: _tail_inverse(mass, alpha, u),
                           support_upper=1.0,
                           small_rate_exponent=alpha)


def custom_measure(params, nu_density, nu_tail, proposal_tail,
                   proposal_tail_inverse, accept_ratio, nu_tail_inverse=None,
                   support_upper=np.inf, small_rate_exponent=None):
    """Wrap user-supplied callables; integrability conditions are the caller's job."""
    return RateMeasureSpec(Family.CUSTOM, params, nu_density, nu_tail,
                           proposal_tail, proposal_tail_inverse, accept_ratio,
                           nu_tail_inverse=nu_tail_inverse,
                           support_upper=support_upper,
                           small_rate_exponent=small_rate_exponent)


def beta_nu_tail_quadrature(measure, x):
    """Adaptive-quadrature route for the beta tail mass, cached per (x, params).

    Kept alongside the special-function forms as the independent check and
    as the fallback for parameter corners.
    """
    if measure.family is not Family.BETA_PROCESS:
        raise ParameterError("quadrature tail route is defined for the beta family")
    return _quad_tail_cached(measure._key(), float(x))


# ---------------------------------------------------------------------------
# sampling operations
# ---------------------------------------------------------------------------

def _rejection_until(measure, n_nonzero, start_coord, rng, chunk):
    """Run the rejection representation from ``start_coord`` until
    ``n_nonzero`` rates are accepted; returns (rates, arrival_coords)."""
    rates = np.empty(n_nonzero)
    coords = np.empty(n_nonzero)
    got = 0
    coord = float(start_coord)
    since_last = 0
    budget = MAX_REJECTION_ITERS_PER_RATE
    while got < n_nonzero:
        e = rng.standard_exponential(chunk)
        g = coord + np.cumsum(e)
        t = np.asarray(measure.proposal_tail_inverse(g), dtype=np.float64)
        u = rng.uniform(size=chunk)
        idx = np.flatnonzero(u <= measure.accept_ratio(t))
        take = min(idx.size, n_nonzero - got)
        rates[got:got + take] = t[idx[:take]]
        coords[got:got + take] = g[idx[:take]]
        got += take
        if idx.size:
            since_last = int(chunk - idx[-1] - 1)
        else:
            since_last += chunk
        if since_last > budget:
            raise NonTerminationError(
                f"no acceptance within {budget} rejection iterations")
        coord = g[-1]
    return rates, coords


def sample_rejection(measure, iterations, seed):
    """Rejection representation: exactly ``iterations`` entries, zeros kept."""
    if iterations < 1:
        raise ParameterError("iterations must be a positive integer")
    rng = np.random.default_rng(seed)
    gammas = np.cumsum(rng.standard_exponential(int(iterations)))
    t = np.asarray(measure.proposal_tail_inverse(gammas), dtype=np.float64)
    u = rng.uniform(size=int(iterations))
    rates = np.where(u <= measure.accept_ratio(t), t, 0.0)
    return TruncatedCRM(rates=rates, gammas=gammas,
                        representation=Representation.REJECTION_RAW,
                        measure=measure, seed=seed)


def sample_inverse_levy(measure, count, seed):
    """First ``count`` nonzero rejection rates, re-coordinatized so that
    gammas[k] = nu_tail(rates[k]) (the inverse-Levy-consistent pairing)."""
    if count < 1:
        raise ParameterError("count must be a positive integer")
    rng = np.random.default_rng(seed)
    chunk = max(256, 2 * int(count))
    rates, _ = _rejection_until(measure, int(count), 0.0, rng, chunk)
    gammas = np.asarray(measure.nu_tail(rates), dtype=np.float64)
    return TruncatedCRM(rates=rates, gammas=gammas,
                        representation=Representation.INVERSE_LEVY,
                        measure=measure, seed=seed)


def extend_inverse_levy(crm, additional, seed):
    """Append ``additional`` rates by restarting the rejection representation
    at the proposal coordinate of the current smallest rate."""
    if additional < 0:
        raise ParameterError("additional must be nonnegative")
    if additional == 0:
        return crm
    if crm.representation is not Representation.INVERSE_LEVY:
        raise ParameterError("extension requires an inverse-Levy CRM")
    rng = np.random.default_rng(seed)
    start = float(crm.measure.proposal_tail(crm.rates[-1]))
    chunk = max(256, 2 * int(additional))
    new_rates, _ = _rejection_until(crm.measure, int(additional), start, rng, chunk)
    new_gammas = np.asarray(crm.measure.nu_tail(new_rates), dtype=np.float64)
    return TruncatedCRM(rates=np.concatenate([crm.rates, new_rates]),
                        gammas=np.concatenate([crm.gammas, new_gammas]),
                        representation=Representation.INVERSE_LEVY,
                        measure=crm.measure, seed=crm.seed)
