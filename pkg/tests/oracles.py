"""Independent reference computations used by several test modules."""
import math

import numpy as np

from selharq.numerics import q_approx


def scc_series_throughput(p_eps, p_eps_s, m, terms=200):
    """k/n from the expected-frames series: round j ends in success at the first or the joint decode."""
    p_c, p_cs = 1 - p_eps, 1 - p_eps_s
    n = 0.0
    for j in range(terms):
        a = (p_eps * p_eps_s) ** j
        n += (j + 1 + j * m) * a * p_c
        n += (j + 1) * (1 + m) * p_eps ** (j + 1) * p_eps_s**j * p_cs
    return 1.0 / n


def ccws_series_throughput(p_eps1, p_eps2, m, terms=200):
    p_c1, p_c2 = 1 - p_eps1, 1 - p_eps2
    n = 0.0
    for j in range(terms):
        n += (1 + m) * (2 * j + 1) * (p_eps1 * p_eps2) ** j * p_c1
        n += (1 + m) * 2 * (j + 1) * p_eps1 ** (j + 1) * p_eps2**j * p_c2
    return 1.0 / n


def genie_scc(c, g, n0, tau, samples, rng, nr=1):
    """Monte Carlo of c*E[qa(sqrt(g*chi/n0))] with chi the combined norm after one SCC selection."""
    x1 = rng.gamma(nr, 1.0, samples)
    x2 = rng.gamma(nr, 1.0, samples)
    total = x1 + np.where(x1 < tau, x2, 0.0)
    vals = c * q_approx(np.sqrt(g * total / n0))
    return vals.mean(), vals.std() / math.sqrt(samples)


def genie_ccws(c, g, n0, tau, samples, rng, nr=1):
    """Four i.i.d. norms: first, its selective copy, the Chase copy and its selective copy."""
    x, xs, xc, xsc = (rng.gamma(nr, 1.0, samples) for _ in range(4))
    total = x + np.where(x < tau, xs, 0.0) + xc + np.where(xc < tau, xsc, 0.0)
    vals = c * q_approx(np.sqrt(g * total / n0))
    return vals.mean(), vals.std() / math.sqrt(samples)
