"""Slow, literal reference implementations used as test oracles.

Everything here loops over tuples explicitly and shares no code with the
vectorized evaluators it checks, apart from the kernel itself.
"""

import itertools

import numpy as np

from stablechaos.kernel import heat_solve_initial, kernel


def admissible(tup, n_real, pairwise):
    if any(a == b for a, b in zip(tup, tup[1:])):
        return False
    if pairwise:
        real = [i for i in tup if i < n_real]
        return len(set(real)) == len(real)
    return True


def naive_tuple_sum(points, weights, n_real, f, n, pairwise):
    """Sum of ``prod w * f`` over all tuples in ``range(L)**n`` passing the constraint."""
    total = 0.0
    for tup in itertools.product(range(len(weights)), repeat=n):
        if not admissible(tup, n_real, pairwise):
            continue
        args = [points[i][None, :] for i in tup]
        total += float(np.prod([weights[i] for i in tup])) * float(np.asarray(f(*args)).ravel()[0])
    return total


def brute_chaos_term(points, weights, n_real, u0, n, t, x, spec, grid, steps, pairwise):
    """Order-``n`` term by explicit per-tuple trapezoid recursion.

    For a tuple ``(i_1..i_n)`` the integrand is built as
    ``F_1(s) = P_s u0 (x_{i_1})`` and
    ``F_{j+1}(s) = int_0^s G(s - r, x_{i_{j+1}}, x_{i_j}) y_{i_j} F_j(r) dr``,
    with ``G(0+, a, b) = 0`` for ``a != b``.
    """
    h = t / steps
    s = h * np.arange(steps + 1)
    x = np.asarray(x, float)
    L = len(weights)

    cache = {}

    def G(lag, a, b):
        # kernel at time lag * h between labelled points, memoized per (lag, a, b)
        key = (lag, a, b)
        if key not in cache:
            pa = x if a == "x" else points[a]
            cache[key] = 0.0 if lag <= 0 else float(kernel(s[lag], pa, points[b], spec))
        return cache[key]

    def heat(i):
        pt = points[i][None, :]
        return np.array([float(u0(pt)[0]) if k == 0 else float(heat_solve_initial(u0, s[k], pt, spec, grid)[0]) for k in range(steps + 1)])

    v = [heat(i) for i in range(L)]

    def trap(k, fun):
        if k == 0:
            return 0.0
        return h * sum((0.5 if l in (0, k) else 1.0) * fun(l) for l in range(k + 1))

    total = 0.0
    for tup in itertools.product(range(L), repeat=n):
        if not admissible(tup, n_real, pairwise):
            continue
        F = v[tup[0]].copy()
        for a, b in zip(tup, tup[1:]):
            F = np.array([trap(k, lambda l: G(k - l, b, a) * weights[a] * F[l]) for k in range(steps + 1)])
        a = tup[-1]
        total += trap(steps, lambda l: G(steps - l, "x", a) * weights[a] * F[l])
    return total
