"""Compiled kernels: Gray-code traversals and clause local search.

Both kernels walk the reflected binary Gray code starting from the all-(+1)
state; step ``g`` flips variable ``ctz(g)`` (0-based). A state is encoded as a
bitmask whose bit ``i`` is set when spin ``i`` equals -1.
"""
from __future__ import annotations

import numpy as np
from numba import njit

REANCHOR_EVERY = 1 << 16


@njit(cache=True, nogil=True)
def _ctz(g):
    i = 0
    while (g & 1) == 0:
        g >>= 1
        i += 1
    return i


@njit(cache=True, nogil=True)
def ksat_gray(n, var_ptr, var_clause, var_req, clause_size, clause_weight, table, record):
    """Minimum weighted unsatisfied count over all 2**n states.

    Clauses are canonical: each involves distinct variables, and clause ``c``
    is unsatisfied when every one of its variables takes the required spin.
    Incidence of variable ``i`` lives in ``var_ptr[i]:var_ptr[i + 1]``.
    Returns ``(best, best_state)``; fills ``table[state]`` when ``record``.
    """
    n_clauses = clause_size.shape[0]
    matched = np.zeros(n_clauses, dtype=np.int64)
    spins = np.ones(n, dtype=np.int8)
    total = 0
    for e in range(var_ptr[n]):
        if var_req[e] == 1:
            matched[var_clause[e]] += 1
    for c in range(n_clauses):
        if matched[c] == clause_size[c]:
            total += clause_weight[c]
    best = total
    best_state = 0
    state = 0
    if record:
        table[0] = total
    n_states = 1 << n
    for g in range(1, n_states):
        i = _ctz(g)
        s = spins[i]
        for e in range(var_ptr[i], var_ptr[i + 1]):
            c = var_clause[e]
            if var_req[e] == s:
                if matched[c] == clause_size[c]:
                    total -= clause_weight[c]
                matched[c] -= 1
            else:
                matched[c] += 1
                if matched[c] == clause_size[c]:
                    total += clause_weight[c]
        spins[i] = -s
        state ^= 1 << i
        if record:
            table[state] = total
        if total < best:
            best = total
            best_state = state
    return best, best_state


@njit(cache=True, nogil=True)
def _anchored_sum(coef, sgn):
    # Kahan summation
    acc = 0.0
    comp = 0.0
    for j in range(coef.shape[0]):
        y = coef[j] * sgn[j] - comp
        t = acc + y
        comp = (t - acc) - y
        acc = t
    return acc


@njit(cache=True, nogil=True)
def pspin_gray(n, var_ptr, var_term, coef, constant, table, record, reanchor):
    """Maximum of a multilinear form ``constant + sum_j coef[j] * prod_{i in S_j} s_i``.

    Incidence of variable ``i`` over the non-empty monomials ``S_j`` lives in
    ``var_ptr[i]:var_ptr[i + 1]``. Returns ``(best, best_state)``.
    """
    n_terms = coef.shape[0]
    sgn = np.ones(n_terms, dtype=np.float64)
    value = _anchored_sum(coef, sgn)
    best = value
    best_state = 0
    state = 0
    if record:
        table[0] = value + constant
    n_states = 1 << n
    for g in range(1, n_states):
        i = _ctz(g)
        delta = 0.0
        for e in range(var_ptr[i], var_ptr[i + 1]):
            j = var_term[e]
            delta += coef[j] * sgn[j]
            sgn[j] = -sgn[j]
        state ^= 1 << i
        if g % reanchor == 0:
            value = _anchored_sum(coef, sgn)
        else:
            value -= 2.0 * delta
        if record:
            table[state] = value + constant
        if value > best:
            best = value
            best_state = state
    return best + constant, best_state


@njit(cache=True, nogil=True)
def ksat_local_search(n, var_ptr, var_clause, var_req, clause_size, clause_weight, starts, ties):
    """Best unsatisfied count over restarts of single-flip hill climbing.

    Each restart begins at ``starts[r]`` and takes up to ``ties.shape[1]``
    moves; a move flips a variable of minimal delta when that delta is
    non-positive (sideways moves allowed), choosing among equals with
    ``ties[r, step]``.
    """
    n_clauses = clause_size.shape[0]
    best = -1
    delta = np.zeros(n, dtype=np.int64)
    for r in range(starts.shape[0]):
        spins = starts[r].copy()
        matched = np.zeros(n_clauses, dtype=np.int64)
        for i in range(n):
            for e in range(var_ptr[i], var_ptr[i + 1]):
                if var_req[e] == spins[i]:
                    matched[var_clause[e]] += 1
        total = 0
        for c in range(n_clauses):
            if matched[c] == clause_size[c]:
                total += clause_weight[c]
        if best < 0 or total < best:
            best = total
        for step in range(ties.shape[1]):
            if total == 0:
                break
            lowest = 0
            for i in range(n):
                d = 0
                for e in range(var_ptr[i], var_ptr[i + 1]):
                    c = var_clause[e]
                    if var_req[e] == spins[i]:
                        if matched[c] == clause_size[c]:
                            d -= clause_weight[c]
                    elif matched[c] + 1 == clause_size[c]:
                        d += clause_weight[c]
                delta[i] = d
                if i == 0 or d < lowest:
                    lowest = d
            if lowest > 0:
                break
            count = 0
            for i in range(n):
                if delta[i] == lowest:
                    count += 1
            pick = int(ties[r, step] * count)
            if pick >= count:
                pick = count - 1
            chosen = 0
            for i in range(n):
                if delta[i] == lowest:
                    if pick == 0:
                        chosen = i
                        break
                    pick -= 1
            s = spins[chosen]
            for e in range(var_ptr[chosen], var_ptr[chosen + 1]):
                c = var_clause[e]
                if var_req[e] == s:
                    matched[c] -= 1
                else:
                    matched[c] += 1
            spins[chosen] = -s
            total += lowest
            if total < best:
                best = total
    return best
