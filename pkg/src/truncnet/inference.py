"""Truncated posterior inference for the beta-Bernoulli network model.

The chain state lives in unconstrained coordinates: logits for the discount
and the boundary rate, logs for the mass and the shifted concentration, and
a shifted logistic for every non-boundary rate mapping into (theta_K, 1).
The sampler combines an exact Gibbs move for the mass with Gaussian
random-walk Metropolis-Hastings moves on everything else; the adaptive loop
raises the truncation level until the total-variation certificate
3(eps+eta)/2 - eps*eta falls below the requested threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import _kernels
from .bounds import bound_conditional
from .errors import ParameterError, QuadratureError
from .measures import (Representation, TruncatedCRM, beta_process,
                       beta_tail_mass, extend_inverse_levy,
                       sample_inverse_levy)
from .netgen import EdgeCounts, LikKind, bernoulli_likelihood, max_vertex_index

MOVE_ALPHA_U = "alpha_u"
MOVE_LAMBDA_U = "lambda_u"
MOVE_THETA_UK = "theta_uK"
MOVE_THETA_ZERO_BLOCK = "theta_u_zero_block"
MOVE_THETA_SINGLE = "theta_u_single"

# fixed within-iteration update order
MOVE_ORDER = ("gibbs_gamma", MOVE_ALPHA_U, MOVE_LAMBDA_U, MOVE_THETA_UK,
              MOVE_THETA_ZERO_BLOCK, MOVE_THETA_SINGLE)


@dataclass(frozen=True)
class Hyperprior:
    """Gamma(a, b) prior on the mass; Normal(0, sd^2) on the unconstrained
    discount and concentration coordinates."""

    gamma_a: float = 1.0
    gamma_b: float = 1.0
    normal_sd: float = 10.0


@dataclass
class ChainState:
    alpha_u: float
    lambda_u: float
    gamma_u: float
    theta_u: np.ndarray
    cached_logpost: float = None
    cached_cond_bound: float = None

    @property
    def K(self):
        return int(self.theta_u.size)

    def constrained(self):
        alpha, lam, gamma = constrain_hyper(self.alpha_u, self.lambda_u, self.gamma_u)
        theta = constrain_rates(self.theta_u)
        return alpha, lam, gamma, theta

    def copy(self):
        return ChainState(self.alpha_u, self.lambda_u, self.gamma_u,
                          self.theta_u.copy(), self.cached_logpost,
                          self.cached_cond_bound)


@dataclass(frozen=True)
class TVCertificate:
    epsilon: float
    eta: float
    bound: float
    K: int
    n_samples: int


# ---------------------------------------------------------------------------
# unconstrained transforms
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return special.expit(x)


def _log_sigmoid_jac(x):
    """log of d sigmoid(x)/dx = log s + log(1-s), computed stably."""
    ax = np.abs(x)
    return -ax - 2.0 * np.log1p(np.exp(-ax))


def constrain_hyper(alpha_u, lambda_u, gamma_u):
    return float(_sigmoid(np.float64(alpha_u))), 1.0 + math.exp(lambda_u), math.exp(gamma_u)


def unconstrain_hyper(alpha, lam, gamma):
    if not (0.0 < alpha < 1.0 and lam > 1.0 and gamma > 0.0):
        raise ParameterError("need alpha in (0,1), lam > 1, gamma > 0")
    return (math.log(alpha) - math.log1p(-alpha), math.log(lam - 1.0),
            math.log(gamma))


def constrain_rates(theta_u):
    """theta_K = logistic(u_K); theta_k = theta_K + (1-theta_K) logistic(u_k)."""
    theta_u = np.asarray(theta_u, dtype=np.float64)
    theta = np.empty_like(theta_u)
    th_k = float(_sigmoid(theta_u[-1]))
    theta[-1] = th_k
    theta[:-1] = th_k + (1.0 - th_k) * _sigmoid(theta_u[:-1])
    return theta


def unconstrain_rates(theta):
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta <= 0) or np.any(theta >= 1):
        raise ParameterError("rates must lie in (0, 1)")
    th_k = theta[-1]
    if np.any(theta[:-1] <= th_k):
        raise ParameterError("leading rates must exceed theta_K")
    out = np.empty_like(theta)
    out[-1] = math.log(th_k) - math.log1p(-th_k)
    s = (theta[:-1] - th_k) / (1.0 - th_k)
    out[:-1] = np.log(s) - np.log1p(-s)
    return out


def log_jac_rates(theta_u):
    """log |det d theta / d theta_u| for the rate transform."""
    theta_u = np.asarray(theta_u, dtype=np.float64)
    th_k = float(_sigmoid(theta_u[-1]))
    val = float(_log_sigmoid_jac(theta_u[-1]))
    if theta_u.size > 1:
        val += (theta_u.size - 1) * math.log1p(-th_k)
        val += float(_log_sigmoid_jac(theta_u[:-1]).sum())
    return val


def log_jac_hyper(alpha_u, lambda_u, gamma_u):
    """log-Jacobians of the three hyperparameter transforms, as a dict
    (the posterior only consumes the gamma one; the others are exposed for
    the finite-difference checks and for priors placed on the constrained
    scale)."""
    return {
        "alpha": float(_log_sigmoid_jac(np.float64(alpha_u))),
        "lambda": float(lambda_u),
        "gamma": float(gamma_u),
    }


# ---------------------------------------------------------------------------
# sufficient statistics
# ---------------------------------------------------------------------------

class _SuffStats:
    """Per-unordered-pair combined counts plus CSR adjacency, for d = 2."""

    def __init__(self, edges, K, N):
        if edges.d != 2:
            raise ParameterError("inference implements the d = 2 network model")
        i_n = max_vertex_index(edges)
        if i_n >= K:
            raise ParameterError(f"need K > I_N = {i_n}, got K = {K}")
        pair_counts = {}
        for (a, b), c in edges.counts.items():
            key = (a - 1, b - 1) if a < b else (b - 1, a - 1)
            pair_counts[key] = pair_counts.get(key, 0) + c
            if c > N:
                raise ParameterError("Bernoulli counts cannot exceed N per direction")
        self.K = K
        self.N = N
        m = len(pair_counts)
        self.pair_i = np.empty(m, dtype=np.int64)
        self.pair_j = np.empty(m, dtype=np.int64)
        self.pair_c = np.empty(m, dtype=np.float64)
        adj = [[] for _ in range(K)]
        for idx, ((a, b), c) in enumerate(sorted(pair_counts.items())):
            self.pair_i[idx] = a
            self.pair_j[idx] = b
            self.pair_c[idx] = c
            adj[a].append((b, c))
            adj[b].append((a, c))
        indptr = np.zeros(K + 1, dtype=np.int64)
        nbr, cnt = [], []
        for k in range(K):
            indptr[k + 1] = indptr[k] + len(adj[k])
            for j, c in adj[k]:
                nbr.append(j)
                cnt.append(c)
        self.nbr_indptr = indptr
        self.nbr_idx = np.asarray(nbr, dtype=np.int64)
        self.nbr_cnt = np.asarray(cnt, dtype=np.float64)
        deg = np.zeros(K, dtype=np.int8)
        deg[self.pair_i] = 1
        deg[self.pair_j] = 1
        self.deg_pos = deg
        self.zero_idx = np.flatnonzero(deg[:-1] == 0)  # boundary rate excluded


def _obs_term(theta, ss):
    """sum over observed pairs of c * (log v - log(1 - v)), v = theta_i theta_j."""
    if ss.pair_i.size == 0:
        return 0.0
    v = theta[ss.pair_i] * theta[ss.pair_j]
    return float((ss.pair_c * (np.log(v) - np.log1p(-v))).sum())


# ---------------------------------------------------------------------------
# log posterior
# ---------------------------------------------------------------------------

def _beta_log_coeff(gamma, lam, alpha):
    return (math.log(gamma) + special.gammaln(lam + 1.0)
            - special.gammaln(1.0 - alpha) - special.gammaln(lam + alpha))


def _log_prior_theta(theta, gamma, lam, alpha):
    logs = np.log(theta)
    log1m = np.log1p(-theta)
    return (theta.size * _beta_log_coeff(gamma, lam, alpha)
            + (-1.0 - alpha) * float(logs.sum())
            + (lam + alpha - 1.0) * float(log1m.sum()))


def _log_hyper(alpha_u, lambda_u, gamma_u, hp):
    gamma = math.exp(gamma_u)
    lp = -0.5 * (alpha_u / hp.normal_sd) ** 2 - math.log(hp.normal_sd) - 0.5 * math.log(2 * math.pi)
    lp += -0.5 * (lambda_u / hp.normal_sd) ** 2 - math.log(hp.normal_sd) - 0.5 * math.log(2 * math.pi)
    lp += (hp.gamma_a * math.log(hp.gamma_b) - special.gammaln(hp.gamma_a)
           + (hp.gamma_a - 1.0) * math.log(gamma) - hp.gamma_b * gamma)
    lp += gamma_u  # Jacobian of gamma = exp(gamma_u)
    return lp


def log_posterior_truncated(state, edges, N, measure_family="beta_process",
                            lik=None, hyperprior=None):
    """Log of the truncated posterior density in unconstrained coordinates,
    dropping the beyond-truncation likelihood factor.

    Requires the observed network to fit strictly inside the truncation
    (K > I_N) and a Bernoulli likelihood on a beta-process prior.
    """
    lik = lik or bernoulli_likelihood()
    hyperprior = hyperprior or Hyperprior()
    if measure_family not in ("beta_process", "beta"):
        raise ParameterError("inference supports the beta-process family")
    if lik.kind is not LikKind.BERNOULLI:
        raise ParameterError("inference supports the Bernoulli likelihood")
    ss = edges if isinstance(edges, _SuffStats) else _SuffStats(edges, state.K, N)
    alpha, lam, gamma, theta = state.constrained()
    if theta[-1] > theta[:-1].min(initial=1.0):
        raise ParameterError("rate ordering violated")
    tail = beta_tail_mass(theta[-1], gamma, lam, alpha)
    if not math.isfinite(tail):
        raise ParameterError("non-finite prior tail mass")
    lp = _log_hyper(state.alpha_u, state.lambda_u, state.gamma_u, hyperprior)
    lp += -tail + _log_prior_theta(theta, gamma, lam, alpha)
    lp += log_jac_rates(state.theta_u)
    lp += 2.0 * N * float(_kernels.pairwise_bern_logpi(theta))
    lp += _obs_term(theta, ss)
    return lp


# ---------------------------------------------------------------------------
# sampler engine
# ---------------------------------------------------------------------------

class _Engine:
    """Delta-based MH engine over cached posterior components."""

    def __init__(self, state, ss, hyperprior):
        self.ss = ss
        self.hp = hyperprior
        self.state = state.copy()
        self.theta = constrain_rates(self.state.theta_u)
        self._refresh_sigma()
        self._refresh_theta_caches()

    def _refresh_sigma(self):
        st = self.state
        self.alpha, self.lam, self.gamma = constrain_hyper(
            st.alpha_u, st.lambda_u, st.gamma_u)

    def _refresh_theta_caches(self):
        th = self.theta
        self.sum_log = float(np.log(th).sum())
        self.sum_log1m = float(np.log1p(-th).sum())
        self.s_logpi = float(_kernels.pairwise_bern_logpi(th))
        self.e_obs = _obs_term(th, self.ss)
        self.tail1 = float(beta_tail_mass(th[-1], 1.0, self.lam, self.alpha))

    def logpost(self):
        st = self.state
        lp = _log_hyper(st.alpha_u, st.lambda_u, st.gamma_u, self.hp)
        lp += (-self.gamma * self.tail1
               + self.theta.size * _beta_log_coeff(self.gamma, self.lam, self.alpha)
               + (-1.0 - self.alpha) * self.sum_log
               + (self.lam + self.alpha - 1.0) * self.sum_log1m)
        lp += log_jac_rates(st.theta_u)
        lp += 2.0 * self.ss.N * self.s_logpi + self.e_obs
        return lp

    # ---- sigma moves -----------------------------------------------------

    def _sigma_parts(self, alpha_u, lambda_u, alpha, lam):
        sd = self.hp.normal_sd
        lp = -0.5 * (alpha_u / sd) ** 2 - 0.5 * (lambda_u / sd) ** 2
        tail1 = float(beta_tail_mass(self.theta[-1], 1.0, lam, alpha))
        lp += (-self.gamma * tail1
               + self.theta.size * _beta_log_coeff(self.gamma, lam, alpha)
               + (-1.0 - alpha) * self.sum_log
               + (lam + alpha - 1.0) * self.sum_log1m)
        return lp, tail1

    def gibbs_gamma(self, rng):
        shape = self.hp.gamma_a + self.theta.size
        rate = self.hp.gamma_b + self.tail1
        g = float(rng.gamma(shape, 1.0 / rate))
        self.state.gamma_u = math.log(g)
        self.gamma = g

    def step_alpha(self, rng, sd):
        st = self.state
        prop = st.alpha_u + sd * rng.standard_normal()
        a_new = float(_sigmoid(np.float64(prop)))
        lp0, _ = self._sigma_parts(st.alpha_u, st.lambda_u, self.alpha, self.lam)
        lp1, tail1 = self._sigma_parts(prop, st.lambda_u, a_new, self.lam)
        if math.log(rng.uniform()) <= lp1 - lp0:
            st.alpha_u = prop
            self.alpha = a_new
            self.tail1 = tail1
            return True
        return False

    def step_lambda(self, rng, sd):
        st = self.state
        prop = st.lambda_u + sd * rng.standard_normal()
        l_new = 1.0 + math.exp(prop)
        lp0, _ = self._sigma_parts(st.alpha_u, st.lambda_u, self.alpha, self.lam)
        lp1, tail1 = self._sigma_parts(st.alpha_u, prop, self.alpha, l_new)
        if math.log(rng.uniform()) <= lp1 - lp0:
            st.lambda_u = prop
            self.lam = l_new
            self.tail1 = tail1
            return True
        return False

    # ---- rate moves ------------------------------------------------------

    def _theta_block_logpost_parts(self, theta, theta_u):
        """Everything that depends on the rate vector."""
        sum_log = float(np.log(theta).sum())
        sum_log1m = float(np.log1p(-theta).sum())
        tail1 = float(beta_tail_mass(theta[-1], 1.0, self.lam, self.alpha))
        s_logpi = float(_kernels.pairwise_bern_logpi(theta))
        e_obs = _obs_term(theta, self.ss)
        lp = (-self.gamma * tail1
              + (-1.0 - self.alpha) * sum_log
              + (self.lam + self.alpha - 1.0) * sum_log1m
              + log_jac_rates(theta_u)
              + 2.0 * self.ss.N * s_logpi + e_obs)
        return lp, (sum_log, sum_log1m, tail1, s_logpi, e_obs)

    def step_theta_k(self, rng, sd):
        st = self.state
        prop_u = st.theta_u.copy()
        prop_u[-1] = prop_u[-1] + sd * rng.standard_normal()
        prop = constrain_rates(prop_u)
        lp0, _ = self._theta_block_logpost_parts(self.theta, st.theta_u)
        lp1, parts = self._theta_block_logpost_parts(prop, prop_u)
        if math.log(rng.uniform()) <= lp1 - lp0:
            st.theta_u = prop_u
            self.theta = prop
            (self.sum_log, self.sum_log1m, self.tail1,
             self.s_logpi, self.e_obs) = parts
            return True
        return False

    def step_zero_block(self, rng, sd):
        idx = self.ss.zero_idx
        if idx.size == 0:
            return False
        st = self.state
        prop_u = st.theta_u.copy()
        prop_u[idx] = prop_u[idx] + sd * rng.standard_normal(idx.size)
        prop = constrain_rates(prop_u)
        lp0, _ = self._theta_block_logpost_parts(self.theta, st.theta_u)
        lp1, parts = self._theta_block_logpost_parts(prop, prop_u)
        if math.log(rng.uniform()) <= lp1 - lp0:
            st.theta_u = prop_u
            self.theta = prop
            (self.sum_log, self.sum_log1m, self.tail1,
             self.s_logpi, self.e_obs) = parts
            return True
        return False

    def step_single(self, rng, k, sd):
        """One positive-degree rate move; O(K) via row sums."""
        st = self.state
        th = self.theta
        u_old = float(st.theta_u[k])
        t_old = float(th[k])
        u_new = u_old + sd * rng.standard_normal()
        th_k = float(th[-1])
        t_new = th_k + (1.0 - th_k) * float(_sigmoid(np.float64(u_new)))
        if t_new >= 1.0:
            t_new = np.nextafter(1.0, 0.0)
        d = ((-1.0 - self.alpha) * (math.log(t_new) - math.log(t_old))
             + (self.lam + self.alpha - 1.0) * (math.log1p(-t_new) - math.log1p(-t_old)))
        d += float(_log_sigmoid_jac(np.float64(u_new)) - _log_sigmoid_jac(np.float64(u_old)))
        row_old = float(_kernels.row_bern_logpi(th, k, t_old))
        row_new = float(_kernels.row_bern_logpi(th, k, t_new))
        d += 2.0 * self.ss.N * (row_new - row_old)
        ss = self.ss
        for p in range(ss.nbr_indptr[k], ss.nbr_indptr[k + 1]):
            j = ss.nbr_idx[p]
            c = ss.nbr_cnt[p]
            tj = float(th[j])
            d += c * ((math.log(t_new) - math.log(t_old))
                      - (math.log1p(-t_new * tj) - math.log1p(-t_old * tj)))
        if math.log(rng.uniform()) <= d:
            st.theta_u[k] = u_new
            th[k] = t_new
            self.sum_log += math.log(t_new) - math.log(t_old)
            self.sum_log1m += math.log1p(-t_new) - math.log1p(-t_old)
            self.s_logpi += row_new - row_old
            for p in range(ss.nbr_indptr[k], ss.nbr_indptr[k + 1]):
                j = ss.nbr_idx[p]
                c = ss.nbr_cnt[p]
                tj = float(th[j])
                self.e_obs += c * ((math.log(t_new) - math.log(t_old))
                                   - (math.log1p(-t_new * tj) - math.log1p(-t_old * tj)))
            return True
        return False

    def sweep_singles(self, rng, sd):
        """All positive-degree single-rate moves via the compiled kernel."""
        K = self.theta.size
        normals = rng.standard_normal(K - 1)
        log_unifs = np.log(rng.uniform(size=K - 1))
        acc = _kernels.sweep_single_thetas(
            self.theta, self.state.theta_u, float(self.theta[-1]),
            self.alpha, self.lam + self.alpha,
            self.ss.nbr_indptr, self.ss.nbr_idx, self.ss.nbr_cnt,
            self.ss.deg_pos, 2.0 * self.ss.N, normals, log_unifs, sd)
        # aggregates changed inside the kernel; refresh the cheap ones
        th = self.theta
        self.sum_log = float(np.log(th).sum())
        self.sum_log1m = float(np.log1p(-th).sum())
        self.s_logpi = float(_kernels.pairwise_bern_logpi(th))
        self.e_obs = _obs_term(th, self.ss)
        return int(acc)

    def snapshot(self):
        st = self.state.copy()
        st.cached_logpost = self.logpost()
        return st


def gibbs_gamma(state, edges, hyperprior, seed, N=None):
    """Exact Gibbs draw of the mass given everything else:
    gamma | rest ~ Gamma(a + K, b + nu_1[theta_K, 1])."""
    hyperprior = hyperprior or Hyperprior()
    rng = np.random.default_rng(seed)
    alpha, lam, gamma, theta = state.constrained()
    tail1 = float(beta_tail_mass(theta[-1], 1.0, lam, alpha))
    g = float(rng.gamma(hyperprior.gamma_a + state.K,
                        1.0 / (hyperprior.gamma_b + tail1)))
    out = state.copy()
    out.gamma_u = math.log(g)
    out.cached_logpost = None
    return out


def mh_step(state, edges, N, move, proposal_sd, seed, k=None,
            lik=None, hyperprior=None):
    """One Metropolis-Hastings move on the named unconstrained coordinate(s).

    Symmetric Gaussian proposal; returns (new_state, accepted). ``edges``
    may be an EdgeCounts or a prebuilt sufficient-statistics object.
    """
    if proposal_sd <= 0:
        raise ParameterError("proposal_sd must be positive")
    hyperprior = hyperprior or Hyperprior()
    ss = edges if isinstance(edges, _SuffStats) else _SuffStats(edges, state.K, N)
    rng = np.random.default_rng(seed)
    eng = _Engine(state, ss, hyperprior)
    if move == MOVE_ALPHA_U:
        acc = eng.step_alpha(rng, proposal_sd)
    elif move == MOVE_LAMBDA_U:
        acc = eng.step_lambda(rng, proposal_sd)
    elif move == MOVE_THETA_UK:
        acc = eng.step_theta_k(rng, proposal_sd)
    elif move == MOVE_THETA_ZERO_BLOCK:
        acc = eng.step_zero_block(rng, proposal_sd)
    elif move == MOVE_THETA_SINGLE:
        if k is None or not (0 <= k < state.K - 1):
            raise ParameterError("theta_u_single needs a leading-rate index k")
        acc = eng.step_single(rng, k, proposal_sd)
    else:
        raise ParameterError(f"unknown move {move!r}")
    return eng.snapshot(), bool(acc)


# ---------------------------------------------------------------------------
# chain runner
# ---------------------------------------------------------------------------

@dataclass
class ChainConfig:
    chain_length: int = 2000
    burn_frac: float = 0.2
    sd_alpha: float = 0.1
    sd_lambda: float = 0.1
    sd_theta_k: float = 0.1
    sd_theta: float = 0.1
    sd_theta_zero: float = 0.1
    sample_hyper: bool = True
    hyperprior: Hyperprior = field(default_factory=Hyperprior)


def run_chain(edges, N, K, config, seed, init_state=None, collect_logpost=True):
    """Run the fixed-order sweep sampler at truncation K; returns the list
    of retained post-burn-in states (constrained caches filled lazily)."""
    ss = _SuffStats(edges, K, N)
    rng = np.random.default_rng(seed)
    if init_state is None:
        raise ParameterError("an initial ChainState is required")
    if init_state.K != K:
        raise ParameterError("init state truncation mismatch")
    eng = _Engine(init_state, ss, config.hyperprior)
    burn = int(config.burn_frac * config.chain_length)
    retained = []
    accepts = {"alpha": 0, "lambda": 0, "theta_K": 0, "zero_block": 0, "singles": 0}
    for it in range(config.chain_length):
        if config.sample_hyper:
            eng.gibbs_gamma(rng)
            accepts["alpha"] += eng.step_alpha(rng, config.sd_alpha)
            accepts["lambda"] += eng.step_lambda(rng, config.sd_lambda)
        accepts["theta_K"] += eng.step_theta_k(rng, config.sd_theta_k)
        accepts["zero_block"] += eng.step_zero_block(rng, config.sd_theta_zero)
        accepts["singles"] += eng.sweep_singles(rng, config.sd_theta)
        if it >= burn:
            st = eng.state.copy()
            if collect_logpost:
                st.cached_logpost = eng.logpost()
            retained.append(st)
    return retained, accepts


# ---------------------------------------------------------------------------
# certificates and adaptation
# ---------------------------------------------------------------------------

def attach_cond_bounds(samples, lik=None, d=2):
    """Compute and cache B(Gamma_{1:K}, sigma) for every sample; non-finite
    bounds are kept as +inf and counted."""
    lik = lik or bernoulli_likelihood()
    nonfinite = 0
    for st in samples:
        alpha, lam, gamma, theta = st.constrained()
        try:
            measure = beta_process(gamma, lam, alpha)
            rates = np.sort(theta)[::-1]
            b = bound_conditional(rates, measure, lik, d)
            if not math.isfinite(b):
                raise QuadratureError("non-finite bound")
        except (ParameterError, QuadratureError):
            b = math.inf
            nonfinite += 1
        st.cached_cond_bound = float(b)
    return nonfinite


def tv_certificate(samples, N, lik=None, d=2):
    """Minimize 3(eps+eta)/2 - eps*eta over eps in (0,1), with eta estimated
    from the sampled conditional bounds; candidate eps values are the order
    statistics of N*b plus a 50-point log grid."""
    if not samples:
        raise ParameterError("tv_certificate needs a nonempty sample list")
    b = np.asarray([st.cached_cond_bound for st in samples], dtype=np.float64)
    if np.any(np.isnan(b)):
        raise ParameterError("samples carry no cached conditional bound")
    n = b.size
    k_level = samples[0].K
    nb = np.sort(N * b)
    eps_lo, eps_hi = 1e-12, 1.0 - 1e-12
    cand = np.clip(nb[np.isfinite(nb)], eps_lo, eps_hi)
    grid = np.exp(np.linspace(math.log(1e-6), math.log(1.0 - 1e-6), 50))
    cand = np.unique(np.concatenate([cand, grid]))
    # eta(eps) = fraction of samples with N*b strictly above eps
    idx = np.searchsorted(nb, cand, side="right")
    eta = (n - idx) / n
    obj = 1.5 * (cand + eta) - cand * eta
    j = int(np.argmin(obj))
    return TVCertificate(epsilon=float(cand[j]), eta=float(eta[j]),
                         bound=float(obj[j]), K=k_level, n_samples=n)


def predict_bound_at_k(samples, K_target, extension_seed, N, lik=None, d=2):
    """Extend every sample's rates to K_target under its own hyperparameters
    and recompute the certificate minimum: the predicted bound at K_target.

    Returns (certificate, extended_crms) so that successive depths can keep
    extending without restarting.
    """
    lik = lik or bernoulli_likelihood()
    if K_target < samples[0].K:
        raise ParameterError("K_target must not shrink the truncation")
    return _predict_from_crms(_as_crms(samples), K_target, extension_seed, N, lik, d)


def _as_crms(samples):
    crms = []
    for st in samples:
        if isinstance(st, TruncatedCRM):
            crms.append(st)
            continue
        alpha, lam, gamma, theta = st.constrained()
        measure = beta_process(gamma, lam, alpha)
        rates = np.sort(theta)[::-1]
        gammas = np.asarray(measure.nu_tail(rates), dtype=np.float64)
        crms.append(TruncatedCRM(rates=rates, gammas=gammas,
                                 representation=Representation.INVERSE_LEVY,
                                 measure=measure, seed=0))
    return crms


def _seedseq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _predict_from_crms(crms, K_target, extension_seed, N, lik, d):
    seeds = _seedseq(extension_seed).spawn(len(crms))
    extended = []
    bounds = []
    for crm, sseq in zip(crms, seeds):
        add = K_target - crm.K
        ext = extend_inverse_levy(crm, add, sseq) if add > 0 else crm
        extended.append(ext)
        try:
            b = bound_conditional(ext.rates, ext.measure, lik, d)
            if not math.isfinite(b):
                b = math.inf
        except (ParameterError, QuadratureError):
            b = math.inf
        bounds.append(b)
    holder = [ChainState(0.0, 0.0, 0.0, np.zeros(2), cached_cond_bound=b)
              for b in bounds]
    cert = tv_certificate(holder, N, lik, d)
    cert = replace(cert, K=K_target)
    return cert, extended


@dataclass
class AdaptConfig(ChainConfig):
    xi: float = 0.01
    max_rounds: int = 8
    max_doublings: int = 12
    init_alpha: float = 0.4
    init_lambda: float = 5.0
    init_gamma: float = 2.0
    predict_subsample: int = 0  # 0 = use all retained samples
    d: int = 2


class AdaptationError(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


def adapt_truncation(edges, N, config, seed=0):
    """Adaptive truncated MH: sample at K, certify, and if the certificate
    exceeds xi, extrapolate the bound along a doubling schedule and jump to
    the K that linearly interpolates the last two (K, log10 bound)
    predictions at log10(xi). Starts at K = I_N + 1."""
    if not (0.0 < config.xi < 1.0):
        raise ParameterError("xi must lie in (0, 1)")
    if not edges.counts:
        raise ParameterError("adaptation needs a nonempty network")
    lik = bernoulli_likelihood()
    i_n = max_vertex_index(edges)
    K = i_n + 1
    rootseq = np.random.SeedSequence(seed)
    trace = []
    sigma = (config.init_alpha, config.init_lambda, config.init_gamma)
    last_sample = None
    for rnd in range(1, config.max_rounds + 1):
        s_chain, s_init, s_pred = rootseq.spawn(3)
        alpha0, lam0, gamma0 = sigma
        measure0 = beta_process(gamma0, lam0, alpha0)
        if last_sample is None:
            crm0 = sample_inverse_levy(measure0, K, s_init)
            rates0 = crm0.rates
        else:
            crm_prev = _as_crms([last_sample])[0]
            rates0 = extend_inverse_levy(crm_prev, K - crm_prev.K, s_init).rates
        au, lu, gu = unconstrain_hyper(alpha0, lam0, gamma0)
        init = ChainState(alpha_u=au, lambda_u=lu, gamma_u=gu,
                          theta_u=unconstrain_rates(rates0))
        samples, accepts = run_chain(edges, N, K, config, s_chain, init_state=init)
        nonfinite = attach_cond_bounds(samples, lik, config.d)
        cert = tv_certificate(samples, N, lik, config.d)
        rec = {"round": rnd, "K": K, "certificate": cert, "samples": samples,
               "accepts": accepts, "nonfinite_bounds": nonfinite,
               "predicted_schedule": [], "next_K": None}
        trace.append(rec)
        last_sample = samples[-1]
        sigma = last_sample.constrained()[:3]
        if cert.bound <= config.xi:
            return {"rounds": trace, "final": cert}
        # extrapolate along a doubling schedule
        sub = samples
        if config.predict_subsample and len(samples) > config.predict_subsample:
            step = len(samples) / config.predict_subsample
            sub = [samples[int(i * step)] for i in range(config.predict_subsample)]
        crms = _as_crms(sub)
        points = [(K, cert.bound)]
        k_depth = K
        pred_seeds = s_pred.spawn(config.max_doublings)
        for dbl in range(config.max_doublings):
            k_depth *= 2
            pcert, crms = _predict_from_crms(crms, k_depth, pred_seeds[dbl], N, lik, config.d)
            points.append((k_depth, pcert.bound))
            rec["predicted_schedule"].append((k_depth, pcert.bound))
            if pcert.bound < config.xi:
                break
        else:
            raise AdaptationError("predicted bound never fell below xi", trace)
        (k1, b1), (k2, b2) = points[-2], points[-1]
        l1, l2, lx = math.log10(max(b1, 1e-300)), math.log10(max(b2, 1e-300)), math.log10(config.xi)
        if l2 >= l1:
            k_next = k2
        else:
            frac = (l1 - lx) / (l1 - l2)
            k_next = int(math.ceil(k1 + frac * (k2 - k1)))
        K = max(k_next, K + 1, i_n + 1)
        rec["next_K"] = K
    raise AdaptationError(f"no certificate <= xi within {config.max_rounds} rounds", trace)
