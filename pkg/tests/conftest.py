import numpy as np
import pytest

from truncnet import measures as msr
from truncnet import netgen as net


@pytest.fixture
def bp_dense():
    return msr.beta_process(1.0, 2.0, 0.0)


@pytest.fixture
def bp_sparse():
    return msr.beta_process(1.0, 2.0, 0.6)


@pytest.fixture
def gp_dense():
    return msr.gamma_process(1.0, 2.0, 0.0)


def two_sample_ks(a, b):
    a = np.sort(np.asarray(a))
    b = np.sort(np.asarray(b))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def one_sample_ks(x, cdf):
    x = np.sort(np.asarray(x))
    n = x.size
    c = cdf(x)
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(emp_hi - c)), np.max(np.abs(c - emp_lo))))
