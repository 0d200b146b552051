"""Compiled inner loop for full-horizon runs.

Replicates the staged walk of :mod:`trcm.bandit` (same formulas, same
branch order) over a whole horizon without per-round Python overhead.
Round bookkeeping is reconstructed afterwards from the emitted
(selected, branch, stage) arrays, which carry the same information as the
incremental updates.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _quad_form(g, x, d):
    total = 0.0
    for a in range(d):
        row = 0.0
        for b in range(d):
            row += g[a, b] * x[b]
        total += x[a] * row
    return total


@njit(cache=True)
def _dot(u, x, d):
    total = 0.0
    for a in range(d):
        total += u[a] * x[a]
    return total


@njit(cache=True)
def run_rounds(
    gram_inv,  # (M, S, d, d), mutated
    weighted,  # (M, S, d), mutated
    theta,  # (M, S, d), mutated
    contexts,  # (T, d)
    rewards,  # (M, T)
    psi,  # (M,)
    alpha,
    inv_sqrt_horizon,
    max_stage,
    gated,  # scope walk conditions to surviving candidates
    selected,  # (T,) out
    branch,  # (T,) out
    stage,  # (T,) out
    ovs_selected,  # (T,) out
):
    m, _, d = theta.shape
    horizon = contexts.shape[0]
    v = np.empty(m)
    w = np.empty(m)
    ovs = np.empty(m)
    cand = np.empty(m, np.bool_)
    u = np.empty(d)
    for idx in range(horizon):
        t = idx + 1
        j = t % m
        x = contexts[idx]
        for i in range(m):
            cand[i] = True
        s = 1
        while True:
            si = s - 1
            for i in range(m):
                v[i] = _dot(theta[i, si], x, d)
                q = _quad_form(gram_inv[i, si], x, d)
                if q < 0.0:
                    q = 0.0
                w[i] = alpha * np.sqrt(q)
            thr = 2.0**-s
            if (not gated or cand[j]) and w[j] > thr:
                selected[idx] = j
                branch[idx] = 0
                stage[idx] = s
                ovs_selected[idx] = v[j] + w[j] - psi[j]
                break
            for i in range(m):
                ovs[i] = v[i] + w[i] - psi[i]
            all_tiny = True
            all_small = True
            for i in range(m):
                if gated and not cand[i]:
                    continue
                if w[i] > inv_sqrt_horizon:
                    all_tiny = False
                if w[i] > thr:
                    all_small = False
            if all_tiny:
                best = _cand_argmax(ovs, cand, m)
                selected[idx] = best
                branch[idx] = 1
                stage[idx] = s
                ovs_selected[idx] = ovs[best]
                break
            if s < max_stage and all_small:
                mx = -np.inf
                for i in range(m):
                    if (not gated or cand[i]) and ovs[i] > mx:
                        mx = ovs[i]
                cut = mx - 4.0 * thr
                for i in range(m):
                    if ovs[i] < cut:
                        cand[i] = False
                s += 1
                continue
            best = _cand_argmax(ovs, cand, m)
            selected[idx] = best
            branch[idx] = 2
            stage[idx] = s
            ovs_selected[idx] = ovs[best]
            break
        if branch[idx] == 0:
            # Sherman-Morrison fold of (x, reward) into the winner's stage model.
            i = selected[idx]
            si = stage[idx] - 1
            g = gram_inv[i, si]
            for a in range(d):
                u[a] = 0.0
                for b in range(d):
                    u[a] += g[a, b] * x[b]
            denom = 1.0 + _dot(x, u, d)
            for a in range(d):
                for b in range(d):
                    g[a, b] -= u[a] * u[b] / denom
            for a in range(d):
                for b in range(a + 1, d):
                    sym = 0.5 * (g[a, b] + g[b, a])
                    g[a, b] = sym
                    g[b, a] = sym
            r = rewards[i, idx]
            for a in range(d):
                weighted[i, si, a] += r * x[a]
            th = theta[i, si]
            for a in range(d):
                th[a] = 0.0
                for b in range(d):
                    th[a] += g[a, b] * weighted[i, si, b]


@njit(cache=True)
def _cand_argmax(ovs, cand, m):
    best = -1
    best_val = -np.inf
    any_cand = False
    for i in range(m):
        if cand[i]:
            any_cand = True
            if ovs[i] > best_val:
                best_val = ovs[i]
                best = i
    if not any_cand:
        for i in range(m):
            if ovs[i] > best_val:
                best_val = ovs[i]
                best = i
    return best
