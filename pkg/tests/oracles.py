"""Straight-line reference implementations used only by the tests.

Written in plain Python with no numpy and no shared code with the package,
following the published formulas term by term.
"""

from __future__ import annotations


def bc(a_i, a_j, alpha, eps):
    sim = 1.0 if abs(a_j - a_i) < eps else 0.0
    return alpha * sim * (a_j - a_i)


def hk(a_i, others, eps, literal=False):
    inside = [a_j for a_j in others if abs(a_j - a_i) < eps]
    n_eps = len(inside)
    if n_eps == 0:
        return 0.0
    total = 0.0
    for a_j in inside:
        total += (a_i - a_j) if literal else (a_j - a_i)
    return (n_eps / (n_eps + 1)) * (1.0 / n_eps) * total


def ra(a_i, u_i, a_j, u_j, alpha, literal=False):
    seg_i = (a_i - u_i, a_i + u_i)
    seg_j = (a_j - u_j, a_j + u_j)
    h_ij = min(seg_i[1], seg_j[1]) - max(seg_i[0], seg_j[0])
    if h_ij / u_j > 1:
        sim = h_ij / u_j - 1
    else:
        sim = 0.0
    if literal:
        return alpha * sim * (a_i - a_j)
    return alpha * sim * (a_j - a_i)


def sj(a_i, a_j, alpha, u_i, t_i):
    if abs(a_j - a_i) < u_i:
        sim_term = a_j - a_i
    else:
        sim_term = 0.0
    if abs(a_j - a_i) > t_i:
        rep = -(a_j - a_i)
    else:
        rep = 0.0
    return alpha * (sim_term + rep)


def lorenz(a_i, m_j, alpha, lam, k, rho, M, s=1.0):
    pol = (M**2 - a_i**2) / M**2
    sim = lam**k / (lam**k + abs(m_j - a_i) ** k)
    asm = m_j - a_i
    ref = m_j
    return alpha * s * pol * sim * (rho * asm + (1 - rho) * ref)


def dtw(x, y):
    n, m = len(x), len(y)
    inf = float("inf")
    table = [[inf] * (m + 1) for _ in range(n + 1)]
    table[0][0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = abs(x[i - 1] - y[j - 1])
            table[i][j] = cost + min(table[i - 1][j], table[i][j - 1], table[i - 1][j - 1])
    return table[n][m]
