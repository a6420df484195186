"""Compiled inner loops: chain sampling and Baum-Welch."""

import numpy as np
from numba import njit


@njit(cache=True)
def _draw(cum, u):
    # cum is a cumulative row; the last entry is forced to 1 by the caller
    j = 0
    while j < cum.shape[0] - 1 and u >= cum[j]:
        j += 1
    return j


@njit(cache=True)
def markov_fill(out, start, state, cum_p, uniforms, a, n_contexts):
    """Continue an order-k chain from context ``state`` writing ``out[start:]``."""
    for t in range(start, out.shape[0]):
        s = _draw(cum_p[state], uniforms[t])
        out[t] = s
        if n_contexts > 1:
            state = (state * a + s) % n_contexts


@njit(cache=True)
def hmm_fill(out, state, cum_t, cum_e, u_emit, u_move):
    for t in range(out.shape[0]):
        out[t] = _draw(cum_e[state], u_emit[t])
        state = _draw(cum_t[state], u_move[t])


@njit(cache=True)
def baum_welch(obs, trans, emit, init, max_iter, tol):
    """Scaled Baum-Welch.  Returns (trans, emit, init, loglik, iterations)."""
    n = obs.shape[0]
    m = trans.shape[0]
    a = emit.shape[1]
    trans = trans.copy()
    emit = emit.copy()
    init = init.copy()
    fwd = np.zeros((n, m))
    bwd = np.zeros((n, m))
    scale = np.zeros(n)
    prev = -np.inf
    loglik = -np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # forward
        total = 0.0
        for i in range(m):
            fwd[0, i] = init[i] * emit[i, obs[0]]
            total += fwd[0, i]
        if total <= 0.0:
            return trans, emit, init, -np.inf, it
        scale[0] = total
        for i in range(m):
            fwd[0, i] /= total
        for t in range(1, n):
            total = 0.0
            for j in range(m):
                acc = 0.0
                for i in range(m):
                    acc += fwd[t - 1, i] * trans[i, j]
                fwd[t, j] = acc * emit[j, obs[t]]
                total += fwd[t, j]
            if total <= 0.0:
                return trans, emit, init, -np.inf, it
            scale[t] = total
            for j in range(m):
                fwd[t, j] /= total
        loglik = 0.0
        for t in range(n):
            loglik += np.log(scale[t])
        # backward
        for i in range(m):
            bwd[n - 1, i] = 1.0
        for t in range(n - 2, -1, -1):
            for i in range(m):
                acc = 0.0
                for j in range(m):
                    acc += trans[i, j] * emit[j, obs[t + 1]] * bwd[t + 1, j]
                bwd[t, i] = acc / scale[t + 1]
        # expected counts
        xi = np.zeros((m, m))
        gam = np.zeros((m, a))
        for t in range(n):
            for i in range(m):
                gam[i, obs[t]] += fwd[t, i] * bwd[t, i]
        for t in range(n - 1):
            for i in range(m):
                for j in range(m):
                    xi[i, j] += (
                        fwd[t, i] * trans[i, j] * emit[j, obs[t + 1]] * bwd[t + 1, j] / scale[t + 1]
                    )
        for i in range(m):
            init[i] = fwd[0, i] * bwd[0, i]
            row = 0.0
            for j in range(m):
                row += xi[i, j]
            if row > 0.0:
                for j in range(m):
                    trans[i, j] = xi[i, j] / row
            row = 0.0
            for s in range(a):
                row += gam[i, s]
            if row > 0.0:
                for s in range(a):
                    emit[i, s] = gam[i, s] / row
        z = 0.0
        for i in range(m):
            z += init[i]
        for i in range(m):
            init[i] /= z
        if abs(loglik - prev) < tol:
            break
        prev = loglik
    return trans, emit, init, loglik, it
