"""Exact Polya-Gamma PG(1, c) draws by Devroye's alternating-series rejection method.

``PG(1, c)`` is ``J*(1, |c|/2) / 4``; ``J*`` is sampled from a two-piece
proposal (truncated inverse Gaussian on ``(0, t]``, shifted exponential on
``(t, inf)``) and accepted by bracketing its density between partial sums of
an alternating series.  No truncation error is introduced.
"""

import math

import numpy as np
from scipy.special import log_ndtr

TRUNC = 0.64
_PI2_8 = math.pi ** 2 / 8.0
_LOG_PI_2 = math.log(math.pi / 2.0)


def _series_coef(n, x):
    """n-th term of the alternating series for the J* density at ``x``."""
    k = (n + 0.5) * math.pi
    if x > TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    return math.exp(-1.5 * (_LOG_PI_2 + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) ** 2 / x)


def _exponential_mass(z):
    """Probability of drawing from the exponential piece of the proposal."""
    fz = _PI2_8 + 0.5 * z * z
    root = math.sqrt(1.0 / TRUNC)
    b = root * (TRUNC * z - 1.0)
    a = -root * (TRUNC * z + 1.0)
    x0 = math.log(fz) + fz * TRUNC
    xb = x0 - z + log_ndtr(b)
    xa = x0 + z + log_ndtr(a)
    q_over_p = 4.0 / math.pi * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + q_over_p)


def _truncated_inverse_gaussian(z, rng):
    """Inverse Gaussian with mean ``1/z`` and shape 1, truncated to ``(0, TRUNC]``."""
    if z > 0:
        mu = 1.0 / z
    else:
        mu = math.inf
    if mu > TRUNC:
        alpha = 0.0
        x = 0.0
        while rng.random() > alpha:
            while True:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
                if e1 * e1 <= 2.0 * e2 / TRUNC:
                    break
            x = TRUNC / (1.0 + TRUNC * e1) ** 2
            alpha = math.exp(-0.5 * z * z * x)
        return x
    x = TRUNC + 1.0
    while x > TRUNC:
        y = rng.standard_normal() ** 2
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * math.sqrt(4.0 * mu * y + (mu * y) ** 2)
        if rng.random() > mu / (mu + x):
            x = mu * mu / x
    return x


def sample_pg1_scalar(c, rng):
    z = 0.5 * abs(float(c))
    fz = _PI2_8 + 0.5 * z * z
    p_exp = _exponential_mass(z)
    while True:
        if rng.random() < p_exp:
            x = TRUNC + rng.standard_exponential() / fz
        else:
            x = _truncated_inverse_gaussian(z, rng)
        s = _series_coef(0, x)
        u = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if u <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x)
                if u > s:
                    break


def sample_pg1(c, rng) -> np.ndarray:
    """Independent ``PG(1, c_n)`` draws for each entry of ``c``."""
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    return np.array([sample_pg1_scalar(ci, rng) for ci in c])


def pg1_mean(c):
    """``E[PG(1, c)] = tanh(c/2) / (2c)``, with limit ``1/4`` at ``c = 0``."""
    c = np.asarray(c, dtype=np.float64)
    small = np.abs(c) < 1e-6
    safe = np.where(small, 1.0, c)
    return np.where(small, 0.25 - c * c / 48.0, np.tanh(safe / 2.0) / (2.0 * safe))


def pg1_variance(c):
    """Variance of ``PG(1, c)``; ``1/24`` at ``c = 0``."""
    c = np.asarray(c, dtype=np.float64)
    small = np.abs(c) < 1e-3
    safe = np.where(small, 1.0, c)
    big = (np.sinh(safe) - safe) / (4.0 * safe ** 3 * np.cosh(safe / 2.0) ** 2)
    return np.where(small, 1.0 / 24.0 - c * c / 120.0, big)
