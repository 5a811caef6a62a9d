import math

import numpy as np
import pytest
from scipy import integrate

from truncnet import measures as msr
from truncnet.errors import ParameterError

from conftest import one_sample_ks, two_sample_ks


# ---------------------------------------------------------------------------
# tail masses: special-function route vs adaptive quadrature
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("lam,alpha", [(1.0, 0.0), (2.0, 0.0), (3.5, 0.0),
                                       (2.0, 0.2), (2.0, 0.6), (1.5, 0.9),
                                       (0.5, 0.6)])
def test_beta_tail_matches_quadrature(lam, alpha):
    m = msr.beta_process(1.3, lam, alpha)
    for x in (1e-4, 0.01, 0.2, 0.7, 0.99):
        a = float(m.nu_tail(x))
        b = msr.beta_nu_tail_quadrature(m, x)
        assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("lam,alpha", [(2.0, 0.0), (2.0, 0.6), (1.0, 0.3)])
def test_gamma_tail_matches_quadrature(lam, alpha):
    m = msr.gamma_process(0.8, lam, alpha)
    for x in (1e-3, 0.05, 0.5, 2.0):
        a = float(m.nu_tail(x))
        b, _ = integrate.quad(lambda t: float(m.nu_density(t)), x, np.inf,
                              epsabs=1e-12, epsrel=1e-12, limit=200)
        assert a == pytest.approx(b, rel=1e-8, abs=1e-12)


def test_beta_tail_small_alpha_continuity():
    # the betainc branch must join the alpha=0 branch smoothly
    ref = float(msr.beta_process(1.0, 2.0, 0.0).nu_tail(0.3))
    for alpha in (1e-7, 1e-5, 1e-4):
        v = float(msr.beta_process(1.0, 2.0, alpha).nu_tail(0.3))
        assert v == pytest.approx(ref, rel=1e-3 * max(1.0, alpha / 1e-7))


def test_tail_inverse_round_trip(bp_dense, bp_sparse, gp_dense):
    u = np.array([0.3, 1.0, 4.0, 17.0])
    for m in (bp_dense, bp_sparse, gp_dense, msr.gamma_process(1.0, 2.0, 0.6)):
        th = np.atleast_1d(m.nu_tail_inverse(u))
        back = np.asarray(m.nu_tail(th))
        assert np.all(np.abs(back - u) <= 1e-9 * np.maximum(u, 1.0))


def test_parameter_domain_errors():
    with pytest.raises(ParameterError):
        msr.beta_process(1.0, 2.0, 1.2)
    with pytest.raises(ParameterError):
        msr.beta_process(-1.0, 2.0, 0.0)
    with pytest.raises(ParameterError):
        msr.beta_process(1.0, 0.2, 0.1)  # lam + alpha < 1
    with pytest.raises(ParameterError):
        msr.gamma_process(1.0, -2.0, 0.0)
    with pytest.raises(ParameterError):
        msr.power_law_measure(1.0, 0.5, proposal_mass=0.5)


# ---------------------------------------------------------------------------
# rejection representation
# ---------------------------------------------------------------------------

def test_rejection_no_rejections_when_ratio_is_one():
    # BP(1, 1, 0): density ratio (1-t)^0 = 1, so every proposal is kept
    m = msr.beta_process(1.0, 1.0, 0.0)
    crm = msr.sample_rejection(m, 500, seed=42)
    assert np.all(crm.rates > 0)
    assert np.allclose(crm.rates, np.exp(-crm.gammas / 1.0))


def test_gamma_dense_proposal_formula():
    # at arrival gamma*lam*ln 2 the proposal rate equals 1/lam
    gamma, lam = 1.7, 3.0
    m = msr.gamma_process(gamma, lam, 0.0)
    t1 = float(m.proposal_tail_inverse(gamma * lam * math.log(2.0)))
    assert t1 == pytest.approx(1.0 / lam, rel=1e-12)


def test_rejection_acceptance_frequency_quadrature_oracle():
    # BP(1, 2, 0): acceptance probability at arrival u is (1 - e^{-u/2}).
    # The count of acceptances among n arrivals has mean ~ int_0^n a(u) du
    # and variance ~ int_0^n a(1-a) du + O(1) (arrival jitter).
    m = msr.beta_process(1.0, 2.0, 0.0)
    n = 100_000
    crm = msr.sample_rejection(m, n, seed=7)
    accepted = int((crm.rates > 0).sum())
    a = lambda u: 1.0 - np.exp(-u / 2.0)
    mean, _ = integrate.quad(a, 0, n)
    var, _ = integrate.quad(lambda u: a(u) * (1.0 - a(u)), 0, n)
    sd = math.sqrt(var + 4.0)
    assert abs(accepted - mean) <= 5.0 * sd


def test_power_law_self_proposal_is_inverse_levy_map():
    m = msr.power_law_measure(1.4, 0.5)
    crm = msr.sample_rejection(m, 200, seed=3)
    assert np.all(crm.rates > 0)
    expected = (1.0 + 0.5 * crm.gammas / 1.4) ** (-2.0)
    assert np.allclose(crm.rates, expected, rtol=1e-12)


def test_rejection_determinism(bp_sparse):
    a = msr.sample_rejection(bp_sparse, 300, seed=11)
    b = msr.sample_rejection(bp_sparse, 300, seed=11)
    assert np.array_equal(a.rates, b.rates)
    assert np.array_equal(a.gammas, b.gammas)
    c = msr.sample_rejection(bp_sparse, 300, seed=12)
    assert not np.array_equal(a.rates, c.rates)


# ---------------------------------------------------------------------------
# inverse-Levy sampling
# ---------------------------------------------------------------------------

def test_inverse_levy_strictly_decreasing(bp_dense, bp_sparse, gp_dense):
    for m in (bp_dense, bp_sparse, gp_dense):
        crm = msr.sample_inverse_levy(m, 3, seed=5)
        assert np.all(np.diff(crm.rates) < 0)
        assert np.all(np.diff(crm.gammas) > 0)


def test_inverse_levy_gamma_round_trip(bp_dense):
    crm = msr.sample_inverse_levy(bp_dense, 8, seed=9)
    err = np.abs(np.asarray(bp_dense.nu_tail(crm.rates)) - crm.gammas)
    assert np.max(err) <= 1e-10


def test_inverse_levy_determinism(bp_dense):
    a = msr.sample_inverse_levy(bp_dense, 6, seed=21)
    b = msr.sample_inverse_levy(bp_dense, 6, seed=21)
    assert np.array_equal(a.rates, b.rates)


def test_first_rate_distribution(bp_dense):
    # the first inverse-Levy rate has CDF exp(-nu[y, 1])
    reps = 10_000
    seeds = np.random.SeedSequence(123).spawn(reps)
    vals = np.array([msr.sample_inverse_levy(bp_dense, 1, s).rates[0]
                     for s in seeds])
    cdf = lambda y: np.exp(-np.asarray(bp_dense.nu_tail(y)))
    assert one_sample_ks(vals, cdf) < 0.02


def test_extend_zero_is_identity(bp_dense):
    crm = msr.sample_inverse_levy(bp_dense, 4, seed=2)
    assert msr.extend_inverse_levy(crm, 0, seed=77) is crm


def test_extend_appends_below_smallest(bp_sparse):
    crm = msr.sample_inverse_levy(bp_sparse, 4, seed=2)
    ext = msr.extend_inverse_levy(crm, 6, seed=8)
    assert ext.K == 10
    assert np.array_equal(ext.rates[:4], crm.rates)
    assert np.all(ext.rates[4:] < crm.rates[-1])
    assert np.all(np.diff(ext.rates) < 0)


def test_extend_conditional_distribution(bp_dense):
    # given theta_1, the next rate has CDF exp(-(nu[y,1] - nu[theta_1,1]))
    # on (0, theta_1)
    theta1 = 0.4
    g1 = float(bp_dense.nu_tail(theta1))
    base = msr.TruncatedCRM(rates=np.array([theta1]), gammas=np.array([g1]),
                            representation=msr.Representation.INVERSE_LEVY,
                            measure=bp_dense, seed=0)
    reps = 10_000
    seeds = np.random.SeedSequence(321).spawn(reps)
    vals = np.array([msr.extend_inverse_levy(base, 1, s).rates[1]
                     for s in seeds])
    assert np.all(vals < theta1)
    cdf = lambda y: np.exp(-(np.asarray(bp_dense.nu_tail(y)) - g1))
    assert one_sample_ks(vals, cdf) < 0.02


def test_levy_equivalence_thinned_proposal():
    # first K nonzero rates of a thinned rejection representation match
    # the direct inverse-Levy map of fresh arrivals, per coordinate
    target = msr.power_law_measure(1.0, 0.5, proposal_mass=1.6, proposal_alpha=0.75)
    direct = msr.power_law_measure(1.0, 0.5)
    reps, K = 10_000, 5
    seeds = np.random.SeedSequence(55).spawn(reps)
    rej = np.array([msr.sample_inverse_levy(target, K, s).rates for s in seeds])
    rng = np.random.default_rng(99)
    arr = np.cumsum(rng.standard_exponential((reps, K)), axis=1)
    inv = np.asarray(direct.nu_tail_inverse(arr))
    for k in range(K):
        assert two_sample_ks(rej[:, k], inv[:, k]) < 3.0 / math.sqrt(reps)


def test_non_termination_failsafe(monkeypatch):
    monkeypatch.setattr(msr, "MAX_REJECTION_ITERS_PER_RATE", 2000)
    # acceptance ratio ~ 1e-5 at typical proposals: no acceptance in budget
    hopeless = msr.power_law_measure(1e-5, 0.0, proposal_mass=1.0)
    with pytest.raises(msr.NonTerminationError):
        msr.sample_inverse_levy(hopeless, 2, seed=0)


def test_rejection_raw_validation():
    m = msr.beta_process(1.0, 2.0, 0.0)
    with pytest.raises(ParameterError):
        msr.TruncatedCRM(rates=np.array([0.5, 0.2]), gammas=np.array([1.0, 0.5]),
                         representation=msr.Representation.REJECTION_RAW,
                         measure=m, seed=0)
    with pytest.raises(ParameterError):
        msr.TruncatedCRM(rates=np.array([0.2, 0.5]), gammas=np.array([0.5, 1.0]),
                         representation=msr.Representation.INVERSE_LEVY,
                         measure=m, seed=0)
