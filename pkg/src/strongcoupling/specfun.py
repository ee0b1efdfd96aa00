"""Special functions: integer-order Bessel, Laguerre, displacement elements.

All functions are real valued and work in double precision. The Bessel
power series is summed in exact rational arithmetic (the argument is a
binary fraction, so every term is rational), which removes the cancellation
that limits a floating-point series at moderate arguments.
"""

from __future__ import annotations

import math
import operator
from functools import lru_cache

import numpy as np

from .errors import DomainError

#: Arguments up to this value use the power series, larger ones Miller's
#: backward recurrence.
SERIES_LIMIT = 12.0
MAX_BESSEL_ORDER = 10_000
#: Largest Fock index accepted by the displacement routines. Beyond it the
#: starting values of the scaled recurrence underflow for displacements
#: relevant to the bundled models.
MAX_FOCK_INDEX = 1000

# series is truncated once terms fall this far below the largest term
_SERIES_REL_CUTOFF = math.log(1e-30)


def _finite(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def bessel_j(order: int, argument: float) -> float:
    """Bessel function of the first kind ``J_order(argument)``.

    Negative orders and arguments are reduced with
    ``J_{-n}(z) = J_n(-z) = (-1)^n J_n(z)``.
    """
    n = operator.index(order)
    z = _finite(argument, "argument")
    if abs(n) > MAX_BESSEL_ORDER:
        raise DomainError(f"|order| must be <= {MAX_BESSEL_ORDER}, got {n}")
    sign = 1.0
    if n < 0:
        n = -n
        if n % 2:
            sign = -sign
    if z < 0:
        z = -z
        if n % 2:
            sign = -sign
    if z == 0.0:
        return sign if n == 0 else 0.0
    if z <= SERIES_LIMIT:
        value = _bessel_series(n, z)
    else:
        value = _bessel_miller(n, z)
    return sign * value


@lru_cache(maxsize=4096)
def _bessel_series(n: int, z: float) -> float:
    # number of terms from a float estimate of log|term_k|
    lx = math.log(z) - math.log(2.0)

    def logterm(k):
        return (2 * k + n) * lx - math.lgamma(k + 1) - math.lgamma(k + n + 1)

    peak = logterm(0)
    k = 0
    while True:
        k += 1
        lt = logterm(k)
        peak = max(peak, lt)
        if k > z and lt < peak + _SERIES_REL_CUTOFF:
            break
    kmax = k

    # exact sum over a common denominator; z/2 = p / q2 exactly
    p, q = z.as_integer_ratio()
    q2 = 2 * q
    p2 = p * p
    q22 = q2 * q2
    power_p = p ** (2 * kmax + n)
    a = 1  # kmax!/k!
    b = 1  # (kmax+n)!/(k+n)!
    qpow = 1  # q2^(2(kmax-k))
    num = 0
    for k in range(kmax, -1, -1):
        term = power_p * qpow * a * b
        num += -term if k % 2 else term
        if k:
            power_p //= p2
            qpow *= q22
            a *= k
            b *= k + n
    den = q2 ** (2 * kmax + n) * math.factorial(kmax) * math.factorial(kmax + n)
    return num / den


@lru_cache(maxsize=4096)
def _bessel_miller(n: int, z: float) -> float:
    top = max(n, int(z))
    m = top + 40 + int(10.0 * math.sqrt(top))
    m += m % 2
    big, small = 1e250, 1e-250
    j_next, j_cur = 0.0, 1e-30
    norm = 0.0
    saved = 0.0
    # j_cur holds J_k (unnormalized) for k = m, m-1, ..., 0
    for k in range(m, 0, -1):
        if k == n:
            saved = j_cur
        if k % 2 == 0:
            norm += 2.0 * j_cur
        j_prev = (2.0 * k / z) * j_cur - j_next
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > big:
            j_cur *= small
            j_next *= small
            norm *= small
            saved *= small
    if n == 0:
        saved = j_cur
    norm += j_cur
    return saved / norm


def bessel_table(argument: float, kmax: int) -> np.ndarray:
    """``J_n(argument)`` for ``n = -kmax..kmax`` as an array of length 2*kmax+1."""
    pos = [bessel_j(n, argument) for n in range(kmax + 1)]
    neg = [(-1) ** n * pos[n] for n in range(kmax, 0, -1)]
    return np.array(neg + pos)


def laguerre(degree: int, argument: float) -> float:
    """Laguerre polynomial ``L_n(x)`` by the three-term recurrence."""
    return assoc_laguerre(degree, 0, argument)


def assoc_laguerre(degree: int, alpha: int, argument: float) -> float:
    """Associated Laguerre polynomial ``L_n^{(alpha)}(x)``."""
    n = operator.index(degree)
    if n < 0:
        raise DomainError(f"degree must be non-negative, got {n}")
    x = _finite(argument, "argument")
    prev, cur = 0.0, 1.0
    for k in range(n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def _check_index(i: int, name: str) -> int:
    i = operator.index(i)
    if i < 0:
        raise DomainError(f"{name} must be a non-negative Fock index, got {i}")
    if i > MAX_FOCK_INDEX:
        raise DomainError(f"{name}={i} exceeds the stability bound MAX_FOCK_INDEX={MAX_FOCK_INDEX}")
    return i


def _poisson_log_amplitude(k, beta):
    # log of |beta|^k e^(-beta^2/2) / sqrt(k!); log|beta| stays finite when beta^2 underflows
    k = np.asarray(k, dtype=float)
    from scipy.special import gammaln

    return k * math.log(abs(beta)) - 0.5 * beta * beta - 0.5 * gammaln(k + 1.0)


def displacement_element(n: int, m: int, beta: float) -> float:
    """Matrix element ``<n| exp(beta (a - a^dagger)) |m>`` between number states.

    Uses the closed form through associated Laguerre polynomials, evaluated
    with a scaled recurrence so that intermediate values stay bounded.
    """
    n = _check_index(n, "n")
    m = _check_index(m, "m")
    beta = _finite(beta, "beta")
    if beta == 0.0:
        return 1.0 if n == m else 0.0
    if n >= m:
        lo, k, sign = m, n - m, (-1.0 if beta > 0 else 1.0) ** (n - m)
    else:
        lo, k, sign = n, m - n, (1.0 if beta > 0 else -1.0) ** (m - n)
    x = beta * beta
    start = math.exp(float(_poisson_log_amplitude(k, beta)))
    g_prev, g_cur = 0.0, start
    for j in range(lo):
        g_prev, g_cur = g_cur, _scaled_step(j, k, x, g_cur, g_prev)
    value = sign * g_cur
    if not math.isfinite(value):
        raise DomainError(f"displacement element ({n}, {m}) not representable for beta={beta}")
    return value


def _scaled_step(j, k, x, g_cur, g_prev):
    # advances G_j -> G_{j+1}, G_j = |<j+k|D|j>| up to sign
    c1 = (2 * j + 1 + k - x) * np.sqrt((j + 1) / (j + k + 1))
    c2 = (j + k) * np.sqrt(j * (j + 1) / ((j + k) * (j + k + 1))) if j else 0.0
    return (c1 * g_cur - c2 * g_prev) / (j + 1)


def displacement_matrix(dim: int, beta: float) -> np.ndarray:
    """All elements ``<n|exp(beta (a - a^dagger))|m>`` with ``n, m < dim``.

    These are elements of the untruncated operator restricted to the first
    ``dim`` number states, not the exponential of a truncated generator.
    """
    dim = operator.index(dim)
    if dim < 1:
        raise DomainError("dim must be positive")
    _check_index(dim - 1, "dim-1")
    beta = _finite(beta, "beta")
    if beta == 0.0:
        return np.eye(dim)
    x = beta * beta
    ks = np.arange(dim, dtype=float)
    g_cur = np.exp(_poisson_log_amplitude(ks, beta))
    g_prev = np.zeros(dim)
    out = np.zeros((dim, dim))
    rows = np.arange(dim)
    # column m = j of the lower triangle holds offsets k = 0..dim-1-j
    for j in range(dim):
        valid = dim - j
        out[rows[:valid] + j, j] = g_cur[:valid]
        if j == dim - 1:
            break
        c1 = (2 * j + 1 + ks - x) * np.sqrt((j + 1) / (j + ks + 1))
        if j:
            c2 = (j + ks) * np.sqrt(j * (j + 1) / ((j + ks) * (j + ks + 1)))
        else:
            c2 = np.zeros(dim)
        g_prev, g_cur = g_cur, (c1 * g_cur - c2 * g_prev) / (j + 1)
    offset = rows[:, None] - rows[None, :]
    odd = offset % 2 == 1
    lower = np.tril(out)
    if beta > 0:
        lower = np.where(odd, -lower, lower)
    # <m|D|n> = (-1)^(n-m) <n|D|m>
    upper = np.where(odd.T, -lower.T, lower.T)
    result = lower + np.triu(upper, 1)
    if not np.all(np.isfinite(result)):
        raise DomainError(f"displacement matrix of dim {dim} not representable for beta={beta}")
    return result


def coherent_weight(n: int, alpha: float) -> float:
    """Coherent-state amplitude ``exp(-alpha^2/2) alpha^n / sqrt(n!)``."""
    n = operator.index(n)
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    alpha = _finite(alpha, "alpha")
    if alpha == 0.0:
        return 1.0 if n == 0 else 0.0
    mag = math.exp(-0.5 * alpha * alpha + n * math.log(abs(alpha)) - 0.5 * math.lgamma(n + 1))
    return mag if alpha > 0 or n % 2 == 0 else -mag


def coherent_weights(n_max: int, alpha: float) -> np.ndarray:
    """Vector of :func:`coherent_weight` for ``n = 0..n_max-1``."""
    return np.array([coherent_weight(n, alpha) for n in range(n_max)])


def coherent_tail(n_cut: int, alpha: float) -> float:
    """Poisson weight ``sum_{n >= n_cut} |coherent_weight(n, alpha)|^2``."""
    if alpha == 0.0:
        return 0.0 if n_cut > 0 else 1.0
    from scipy.special import gammainc

    if n_cut <= 0:
        return 1.0
    # P(N >= n_cut) for N ~ Poisson(alpha^2) is the regularized lower gamma
    return float(gammainc(n_cut, alpha * alpha))
