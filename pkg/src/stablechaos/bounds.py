"""Closed-form estimates behind the existence results, each paired with a check.

Most functions return both sides of an identity or inequality so callers (the
``verify`` subcommand, the test-suite) can compare them at a chosen tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import integrate, special

from ._quadrature import integrate_unit
from ._validation import check_order
from .noise import NoiseField, StableParams

__all__ = [
    "RegimeReport",
    "regime",
    "hu_closed",
    "hu_recursive",
    "beta_identity",
    "poisson_tail_bound",
    "gamma_lower",
    "band_intensity",
    "band_constant",
    "cluster_radius",
    "cluster_radius_identity",
    "detect_cluster_event",
    "moment_envelope",
    "moment_series_bound",
    "gaussian_q_integral",
    "gaussian_q_integral_radial",
    "power_sum_check",
    "symmetrization_norms",
]


# ---------------------------------------------------------------- regimes


@dataclass(frozen=True)
class RegimeReport:
    p: float
    d: int
    thm1_ok: bool
    thm2_ok: bool
    q_max: float

    def beta(self, delta: float = 1e-3) -> float:
        """Exponent ``d/2 - d/(4(p + delta))`` of the star-product time singularity."""
        return self.d / 2 - self.d / (4 * (self.p + delta))

    def alpha(self, q: float) -> float:
        """``1 - (d/2)(q - 1)``; positive exactly when ``q < q_max``."""
        return 1 - self.d / 2 * (q - 1)


def regime(p: float, d: int) -> RegimeReport:
    """Parameter ranges where the star (p < 1) and diamond (p >= 1) equations are solvable."""
    if not (0 < p < 2) or d < 1:
        raise ValueError(f"need p in (0, 2) and d >= 1, got p={p}, d={d}")
    thm1 = p < 1 and (d <= 4 or p < 0.5 + 1 / (d - 2))
    thm2 = 1 <= p < 1 + 2 / d
    return RegimeReport(p=p, d=d, thm1_ok=bool(thm1), thm2_ok=bool(thm2), q_max=1 + 2 / d)


# ------------------------------------------------------- simplex integrals


def hu_closed(n: int, beta: float, t: float) -> float:
    """``int_{T_n(t)} prod_k (s_{k+1} - s_k)**-beta ds`` with ``s_{n+1} = t``.

    Equals ``t**(n(1-beta)) Gamma(1-beta)**n / Gamma(1 + n(1-beta))``.
    """
    n = check_order(n)
    if beta >= 1:
        raise ValueError(f"beta must be < 1, got {beta}")
    a = 1 - beta
    log_val = n * a * math.log(t) + n * special.gammaln(a) - special.gammaln(1 + n * a)
    return math.exp(log_val)


def _power_kernel_integral(beta: float, b: float, order: int) -> float:
    """``int_0^1 (1-s)**-beta s**b ds`` after substituting ``u = (1-s)**(1-beta)``.

    The substitution absorbs the kernel singularity; what remains is
    ``(1 - u**gamma)**b / (1 - beta)`` with ``gamma = 1/(1-beta)``, whose
    endpoint behaviour the double-exponential rule handles.
    """
    gamma = 1.0 / (1.0 - beta)

    def integrand(u, uc):
        # 1 - u**gamma without cancellation near u = 1; uc == 1 means u == 0
        with np.errstate(divide="ignore"):
            one_minus = -np.expm1(gamma * np.log1p(-uc))
        return one_minus**b

    return integrate_unit(integrand, order) / (1.0 - beta)


def hu_recursive(n: int, beta: float, t: float, quad_order: int = 128) -> float:
    """Evaluate the simplex integral by the time recurrence.

    ``H_{k+1}(t) = int_0^t (t-s)**-beta H_k(s) ds`` together with the scaling
    ``H_k(s) = s**(k(1-beta)) H_k(1)``, each step by numerical quadrature.
    No Gamma-function identity is used.
    """
    n = check_order(n)
    if beta >= 1:
        raise ValueError(f"beta must be < 1, got {beta}")
    if quad_order < 16:
        raise ValueError("quad_order must be >= 16")
    a = 1 - beta
    h_at_one = 1.0  # H_0 == 1
    for k in range(n):
        h_at_one *= _power_kernel_integral(beta, k * a, quad_order)
    return h_at_one * t ** (n * a)


def beta_identity(a: float, b: float, quad_order: int = 256) -> tuple[float, float]:
    """Return ``(int_0^1 (1-x)**(a-1) x**(b-1) dx, Gamma(a)Gamma(b)/Gamma(a+b))``."""
    if a <= 0 or b <= 0:
        raise ValueError("beta_identity needs a, b > 0")
    quad = integrate_unit(lambda x, xc: xc ** (a - 1) * x ** (b - 1), quad_order)
    closed = math.exp(special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b))
    return quad, closed


# ------------------------------------------------------- Poisson and Gamma


def poisson_tail_bound(lam: float, n0: int) -> tuple[float, float, float]:
    """``(P(X >= n0), lam**n0 / n0!, lam**n0 e**n0 / n0**n0)`` for ``X ~ Poisson(lam)``.

    The tail is summed term by term upward from ``n0``, which keeps full
    relative accuracy when it is tiny.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    n0 = check_order(n0, "n0")
    if n0 == 0:
        return 1.0, 1.0, 1.0
    log_lam = math.log(lam)
    terms = []
    k = n0
    while True:
        term = math.exp(k * log_lam - lam - math.lgamma(k + 1))
        terms.append(term)
        # geometric ratio lam/(k+1) < 1/2 from here on bounds the remainder by term
        if k + 1 > 2 * lam and term <= 1e-17 * math.fsum(terms):
            break
        k += 1
    exact = min(math.fsum(terms), 1.0)
    try:
        bound1 = lam**n0 / math.factorial(n0)
        bound2 = (lam * math.e / n0) ** n0
    except OverflowError:
        bound1 = math.exp(n0 * log_lam - math.lgamma(n0 + 1))
        bound2 = math.exp(n0 * log_lam + n0 - n0 * math.log(n0))
    return exact, bound1, bound2


def gamma_lower(x: float) -> tuple[float, float]:
    """``(Gamma(x + 1), x**x e**-x)``."""
    if x <= 0:
        raise ValueError("x must be positive")
    return float(special.gamma(x + 1)), math.exp(x * math.log(x) - x)


# ------------------------------------------------------- particle types


def band_constant(params: StableParams) -> float:
    """``C_p = c_p (2**p - 1) / p``."""
    p = params.p
    return params.c_p * (2**p - 1) / p


def band_intensity(volume: float, n: int, params: StableParams) -> float:
    """Mean number of type-``n`` atoms (mass in ``(2**-(n+1), 2**-n]``) in a region."""
    return band_constant(params) * volume * 2.0 ** (n * params.p)


def cluster_radius(n: int, m: int, k: int, delta: float, p: float, d: int) -> float:
    """Radius ``a_{n,m,M}`` with ``M = 2**k`` below which type-``m`` crowds are unlikely."""
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    M = 2.0**k
    log2_a = (
        -1 / d / math.log(2)
        + 4 / (M * d) * math.log2(delta)
        - p * n / (d * M)
        - p * m / d
        + k / d
        - delta * (n + m + k) / (d * M)
    )
    return 2.0**log2_a


def cluster_radius_identity(n, m, k, delta, p, d) -> tuple[float, float]:
    """Both sides of ``a**(dM) = delta**4 [2**(np + mMp) e**M / M**M]**-1 2**-delta(n+m+k)``, as logs."""
    M = 2.0**k
    lhs = d * M * math.log(cluster_radius(n, m, k, delta, p, d))
    rhs = (
        4 * math.log(delta)
        - (n * p + m * M * p) * math.log(2)
        - M
        + M * math.log(M)
        - delta * (n + m + k) * math.log(2)
    )
    return lhs, rhs


def detect_cluster_event(
    fld: NoiseField,
    delta: float,
    n_range: Iterable[int],
    m_range: Iterable[int],
    k_range: Iterable[int],
) -> bool:
    """True if some type-``n`` atom has ``2**k`` type-``m`` atoms within ``a_{n,m,2**k}``."""
    n_set, m_list, k_list = set(n_range), list(m_range), list(k_range)
    A = len(fld)
    if A < 2 or not n_set or not m_list or not k_list:
        return False
    p, d = fld.params.p, fld.domain.d
    types = fld.type_indices
    X = fld.locations
    dist = np.sqrt(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1))
    np.fill_diagonal(dist, np.inf)
    for a in np.flatnonzero(np.isin(types, list(n_set))):
        n = int(types[a])
        for m in m_list:
            near = np.sort(dist[a, types == m])
            for k in k_list:
                M = 2**k
                if len(near) >= M and near[M - 1] <= cluster_radius(n, m, k, delta, p, d):
                    return True
    return False


# ------------------------------------------------------- moment envelopes


def moment_envelope(n: int, alpha: float, rho: float) -> float:
    """``rho**n / Gamma(1 + n alpha)``."""
    n = check_order(n)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n == 0:
        return 1.0
    return math.exp(n * math.log(rho) - special.gammaln(1 + n * alpha))


def moment_series_bound(alpha: float, rho: float, q: float, n_terms: int) -> np.ndarray:
    """Partial sums of ``c sum_n (c rho)**n / Gamma(1 + n alpha)`` with ``c = 2**(q-1)``."""
    c = 2.0 ** (q - 1)
    terms = [c * moment_envelope(n, alpha, c * rho) for n in range(n_terms)]
    return np.cumsum(terms)


def gaussian_q_integral(r: float, q: float, d: int) -> float:
    """``int_{R^d} G(r, x)**q dx = q**(-d/2) (4 pi r)**(-(q-1) d/2)``."""
    if r <= 0 or q <= 0:
        raise ValueError("r and q must be positive")
    return q ** (-d / 2) * (4 * math.pi * r) ** (-(q - 1) * d / 2)


def gaussian_q_integral_radial(r: float, q: float, d: int) -> float:
    """Same integral by adaptive quadrature in the radial variable."""
    sphere = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    scale = math.sqrt(4 * r / q)

    def integrand(rho):
        g = math.exp(-(rho * rho) / (4 * r)) / (4 * math.pi * r) ** (d / 2)
        return rho ** (d - 1) * g**q

    val, _ = integrate.quad(integrand, 0, 60 * scale, epsabs=0, epsrel=1e-13, limit=200)
    return sphere * val


def power_sum_check(a, q: float) -> tuple[float, float]:
    """``((sum a_n)**q, sum_n 2**((q-1)(n+1)) a_n**q)`` for a nonnegative sequence."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("the sequence must be nonnegative")
    n = np.arange(len(a))
    return float(np.sum(a) ** q), float(np.sum(2.0 ** ((q - 1) * (n + 1)) * a**q))


def symmetrization_norms(f: Callable, n: int, q: float, nodes_1d: int = 24) -> tuple[float, float]:
    """``(||sym f||_q, ||f||_q)`` on ``[0, 1]**n`` by tensor Gauss-Legendre quadrature.

    ``f`` takes ``n`` arrays of shape ``(T, 1)``.
    """
    from .chaos import symmetrize

    z, w = np.polynomial.legendre.leggauss(nodes_1d)
    z, w = (z + 1) / 2, w / 2
    grids = np.meshgrid(*([z] * n), indexing="ij")
    weights = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij")), axis=0).ravel()
    args = [g.ravel()[:, None] for g in grids]
    sym = symmetrize(f, n)
    norm = lambda v: float(np.sum(weights * np.abs(v) ** q) ** (1 / q))
    return norm(sym(*args)), norm(np.asarray(f(*args)))
