"""Hot numeric kernels with a numba @njit path and a pure-numpy fallback.

The compiled path is the default; set TRUNCNET_DISABLE_NUMBA=1 to select the
numpy fallback (same signatures, same RNG consumption, results equal up to
floating-point summation order). ``benchmarks/bench_kernels.py`` times both.
"""

import os

import numpy as np

_flag = os.environ.get("TRUNCNET_DISABLE_NUMBA", "0").strip().lower()
USE_NUMBA = _flag not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy implementations (always available; the fallback path)
# ---------------------------------------------------------------------------

def pairwise_bern_logpi_numpy(theta):
    """sum_{i<j} log1p(-theta_i * theta_j)."""
    t = np.asarray(theta, dtype=np.float64)
    m = np.log1p(-np.outer(t, t))
    return (m.sum() - np.trace(m)) / 2.0


def row_bern_logpi_numpy(theta, k, val):
    """sum_{j != k} log1p(-val * theta_j)."""
    t = np.asarray(theta, dtype=np.float64)
    s = np.log1p(-val * t).sum()
    return s - np.log1p(-val * t[k])


def pair_anyedge_logsurv_numpy(theta, k_keep, log_scale):
    """sum over ordered pairs (i,j), i != j, max(i,j) > k_keep of
    log_scale * log1p(-theta_i * theta_j): the log-probability that no
    Bernoulli edge beyond index k_keep appears in ``log_scale`` rounds.
    Indices are 0-based; k_keep counts retained leading entries."""
    t = np.asarray(theta, dtype=np.float64)
    m = np.log1p(-np.outer(t, t))
    np.fill_diagonal(m, 0.0)
    total = m.sum()
    head = m[:k_keep, :k_keep].sum()
    return log_scale * (total - head)


def vertex_nosurv_logprob_numpy(theta, log_scale):
    """For each vertex k: sum_{j != k} log1p(-theta_k*theta_j) * log_scale,
    the log-probability that vertex k touches no edge (Bernoulli pairs,
    both orientations already folded into log_scale)."""
    t = np.asarray(theta, dtype=np.float64)
    m = np.log1p(-np.outer(t, t))
    np.fill_diagonal(m, 0.0)
    return log_scale * m.sum(axis=1)


def sweep_single_thetas_numpy(theta, theta_u, theta_K, alpha, lam_p_alpha,
                              nbr_indptr, nbr_idx, nbr_cnt, deg_pos, two_n,
                              normals, log_unifs, sd):
    """One MH sweep over positive-degree single-rate moves, in place.

    theta/theta_u are modified; returns the number of accepted moves.
    alpha is the discount, lam_p_alpha = lambda+alpha (the prior coefficient
    log(gamma') cancels in the ratio). nbr_* is CSR adjacency with
    per-neighbor counts; deg_pos marks vertices with nonzero degree
    (theta_K's own slot must be 0). two_n = 2*N.
    """
    K = theta.shape[0]
    one_m_thK = 1.0 - theta_K
    accepted = 0
    for k in range(K - 1):
        if deg_pos[k] == 0:
            continue
        u_old = theta_u[k]
        t_old = theta[k]
        u_new = u_old + sd * normals[k]
        s_new = 1.0 / (1.0 + np.exp(-u_new))
        t_new = theta_K + one_m_thK * s_new
        if t_new >= 1.0:
            t_new = np.nextafter(1.0, 0.0)
        # prior density ratio
        d = ((-1.0 - alpha) * (np.log(t_new) - np.log(t_old))
             + (lam_p_alpha - 1.0) * (np.log1p(-t_new) - np.log1p(-t_old)))
        # jacobian ratio: log s(1-s) difference
        s_old = 1.0 / (1.0 + np.exp(-u_old))
        d += (np.log(s_new) + np.log1p(-s_new)) - (np.log(s_old) + np.log1p(-s_old))
        # unobserved-pair survival rows
        row_new = 0.0
        row_old = 0.0
        for j in range(K):
            if j == k:
                continue
            row_new += np.log1p(-t_new * theta[j])
            row_old += np.log1p(-t_old * theta[j])
        d += two_n * (row_new - row_old)
        # observed-edge rows
        for p in range(nbr_indptr[k], nbr_indptr[k + 1]):
            j = nbr_idx[p]
            c = nbr_cnt[p]
            d += c * ((np.log(t_new) - np.log(t_old))
                      - (np.log1p(-t_new * theta[j]) - np.log1p(-t_old * theta[j])))
        if log_unifs[k] <= d:
            theta_u[k] = u_new
            theta[k] = t_new
            accepted += 1
    return accepted


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True)
    def pairwise_bern_logpi_numba(theta):
        K = theta.shape[0]
        s = 0.0
        for i in range(K):
            ti = theta[i]
            for j in range(i + 1, K):
                s += np.log1p(-ti * theta[j])
        return s

    @njit(cache=True)
    def row_bern_logpi_numba(theta, k, val):
        s = 0.0
        for j in range(theta.shape[0]):
            if j != k:
                s += np.log1p(-val * theta[j])
        return s

    @njit(cache=True)
    def pair_anyedge_logsurv_numba(theta, k_keep, log_scale):
        K = theta.shape[0]
        s = 0.0
        for i in range(K):
            ti = theta[i]
            for j in range(i + 1, K):
                if j >= k_keep:
                    s += np.log1p(-ti * theta[j])
        return 2.0 * log_scale * s

    @njit(cache=True)
    def vertex_nosurv_logprob_numba(theta, log_scale):
        K = theta.shape[0]
        out = np.zeros(K)
        for i in range(K):
            ti = theta[i]
            for j in range(i + 1, K):
                v = np.log1p(-ti * theta[j])
                out[i] += v
                out[j] += v
        return log_scale * out

    @njit(cache=True)
    def sweep_single_thetas_numba(theta, theta_u, theta_K, alpha, lam_p_alpha,
                                  nbr_indptr, nbr_idx, nbr_cnt, deg_pos, two_n,
                                  normals, log_unifs, sd):
        K = theta.shape[0]
        one_m_thK = 1.0 - theta_K
        accepted = 0
        for k in range(K - 1):
            if deg_pos[k] == 0:
                continue
            u_old = theta_u[k]
            t_old = theta[k]
            u_new = u_old + sd * normals[k]
            s_new = 1.0 / (1.0 + np.exp(-u_new))
            t_new = theta_K + one_m_thK * s_new
            if t_new >= 1.0:
                t_new = np.nextafter(1.0, 0.0)
            d = ((-1.0 - alpha) * (np.log(t_new) - np.log(t_old))
                 + (lam_p_alpha - 1.0) * (np.log1p(-t_new) - np.log1p(-t_old)))
            s_old = 1.0 / (1.0 + np.exp(-u_old))
            d += (np.log(s_new) + np.log1p(-s_new)) - (np.log(s_old) + np.log1p(-s_old))
            row_new = 0.0
            row_old = 0.0
            for j in range(K):
                if j == k:
                    continue
                row_new += np.log1p(-t_new * theta[j])
                row_old += np.log1p(-t_old * theta[j])
            d += two_n * (row_new - row_old)
            for p in range(nbr_indptr[k], nbr_indptr[k + 1]):
                j = nbr_idx[p]
                c = nbr_cnt[p]
                d += c * ((np.log(t_new) - np.log(t_old))
                          - (np.log1p(-t_new * theta[j]) - np.log1p(-t_old * theta[j])))
            if log_unifs[k] <= d:
                theta_u[k] = u_new
                theta[k] = t_new
                accepted += 1
        return accepted

    pairwise_bern_logpi = pairwise_bern_logpi_numba
    row_bern_logpi = row_bern_logpi_numba
    pair_anyedge_logsurv = pair_anyedge_logsurv_numba
    vertex_nosurv_logprob = vertex_nosurv_logprob_numba
    sweep_single_thetas = sweep_single_thetas_numba
else:
    def _pair_anyedge_logsurv_wrap(theta, k_keep, log_scale):
        # ordered pairs double the unordered sum
        return pair_anyedge_logsurv_numpy(theta, k_keep, log_scale)

    pairwise_bern_logpi = pairwise_bern_logpi_numpy
    row_bern_logpi = row_bern_logpi_numpy
    pair_anyedge_logsurv = _pair_anyedge_logsurv_wrap
    vertex_nosurv_logprob = vertex_nosurv_logprob_numpy
    sweep_single_thetas = sweep_single_thetas_numpy
