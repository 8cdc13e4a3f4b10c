"""Compiled inner loops for the Gibbs samplers."""

import math

import numba
import numpy as np

from .distributions import _categorical


@numba.njit(cache=True)
def collapsed_sweep(codes, alpha, alpha_sum, nu, class_log_prior, lam, use_lam,
                    labels, sg, sgjk, probs, rng):
    """Resample every label once, in order, with theta integrated out.

    Counts ``sg``/``sgjk`` are kept in sync in place.  The class factor is
    ``s_g^{-i} + lam_g`` when ``use_lam`` (collapsed class weights) and
    ``exp(class_log_prior[i, g])`` otherwise.  ``probs[i]`` receives the
    normalised weights used for observation ``i``.
    """
    n, m = codes.shape
    g_count = sg.shape[0]
    logw = np.empty(g_count)
    w = np.empty(g_count)
    for i in range(n):
        old = labels[i]
        sg[old] -= 1
        for j in range(m):
            sgjk[old, j, codes[i, j]] -= 1
        for g in range(g_count):
            if use_lam:
                lw = math.log(sg[g] + lam[g])
            else:
                lw = class_log_prior[i, g]
            for j in range(m):
                if nu[j]:
                    k = codes[i, j]
                    lw += math.log(sgjk[g, j, k] + alpha[j, k]) - math.log(sg[g] + alpha_sum[j])
            logw[g] = lw
        top = logw.max()
        total = 0.0
        for g in range(g_count):
            w[g] = math.exp(logw[g] - top)
            total += w[g]
        for g in range(g_count):
            w[g] /= total
            probs[i, g] = w[g]
        new = _categorical(rng.random(), w)
        labels[i] = new
        sg[new] += 1
        for j in range(m):
            sgjk[new, j, codes[i, j]] += 1


@numba.njit(cache=True)
def categorical_rows(logw, labels, probs, rng):
    """Independent categorical draw per row of an ``N x G`` log-weight matrix."""
    n, g_count = logw.shape
    w = np.empty(g_count)
    for i in range(n):
        top = -np.inf
        for g in range(g_count):
            if logw[i, g] > top:
                top = logw[i, g]
        total = 0.0
        for g in range(g_count):
            w[g] = math.exp(logw[i, g] - top)
            total += w[g]
        for g in range(g_count):
            w[g] /= total
            probs[i, g] = w[g]
        labels[i] = _categorical(rng.random(), w)


@numba.njit(cache=True)
def offset_excluding(lin, k):
    """Row-wise ``log sum_{h != k} exp(lin[i, h])``."""
    n, g_count = lin.shape
    out = np.empty(n)
    for i in range(n):
        top = -np.inf
        for h in range(g_count):
            if h != k and lin[i, h] > top:
                top = lin[i, h]
        total = 0.0
        for h in range(g_count):
            if h != k:
                total += math.exp(lin[i, h] - top)
        out[i] = top + math.log(total)
    return out


@numba.njit(cache=True)
def row_log_softmax(lin):
    n, g_count = lin.shape
    out = np.empty_like(lin)
    for i in range(n):
        top = lin[i, 0]
        for h in range(1, g_count):
            if lin[i, h] > top:
                top = lin[i, h]
        total = 0.0
        for h in range(g_count):
            total += math.exp(lin[i, h] - top)
        norm = top + math.log(total)
        for h in range(g_count):
            out[i, h] = lin[i, h] - norm
    return out
