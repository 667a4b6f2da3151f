"""Seeded random streams shared by every stochastic component.

All randomness in the package is drawn from PCG64 uniform doubles; derived
distributions (Gaussian, categorical, Poisson, subsampling) are computed here
from those uniforms so that a given seed yields the same numbers regardless of
which higher-level numpy sampling routines happen to change between releases.
"""

import numpy as np
from scipy import stats


def make_rng(seed, stream=0):
    """Return the generator for ``(seed, stream)``.

    Streams with different ids are statistically independent children of the
    same master seed, so components can draw without sharing state.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def uniform(rng, size=None):
    """Uniform doubles in [0, 1)."""
    return rng.random(size)


def uniform_open(rng, size=None):
    """Uniform doubles in (0, 1]."""
    return 1.0 - rng.random(size)


def gauss(rng, size):
    """Standard normal draws by the Box–Muller transform."""
    size = int(size)
    m = (size + 1) // 2
    u1 = uniform_open(rng, m)
    u2 = uniform(rng, m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return z[:size]


def categorical(rng, p, size):
    """Indices drawn with probabilities ``p`` by inverse-CDF lookup."""
    cdf = np.cumsum(np.asarray(p, dtype=float))
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, uniform(rng, size), side="right")
    return np.minimum(idx, len(cdf) - 1)


def poisson(rng, lam, size):
    u = uniform(rng, size)
    return stats.poisson.ppf(u, lam).astype(np.int64)


def sample_without_replacement(rng, population, k):
    """``k`` distinct items of ``population``, uniformly at random.

    Implemented as a sort on i.i.d. uniform keys; the result is returned in the
    order of the sampled keys (a uniformly random order).
    """
    population = np.asarray(population)
    if k > len(population):
        raise ValueError("sample larger than population")
    keys = uniform(rng, len(population))
    order = np.argsort(keys, kind="stable")
    return population[order[:k]]
