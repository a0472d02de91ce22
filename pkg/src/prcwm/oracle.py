"""Brute-force reference computations, kept independent of the modules they check.

Only the core string types are shared. Everything here enumerates exactly,
using rationals or compensated sums, and refuses inputs past a size limit.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .errors import InvalidParams, TooLarge

MAX_TRUTH_BITS = 16
MAX_BRUTE_BITS = 12


def _truth_table(f) -> tuple[np.ndarray, int]:
    f = np.asarray(f, dtype=np.int64).reshape(-1)
    t = int(round(math.log2(f.size))) if f.size else -1
    if t < 0 or 1 << t != f.size:
        raise InvalidParams("truth table length must be a power of two")
    if t > MAX_TRUTH_BITS:
        raise TooLarge(f"{t} input bits exceeds the limit of {MAX_TRUTH_BITS}")
    return f & 1, t


def noise_sensitivity_bruteforce(f, delta: float) -> float:
    """``Pr[f(x) != f(x xor e)]`` with ``x`` uniform and ``e`` i.i.d. ``Ber(delta)``."""
    f, t = _truth_table(f)
    if t > MAX_BRUTE_BITS:
        raise TooLarge(f"brute force over inputs and flip patterns is limited to {MAX_BRUTE_BITS} bits")
    size = 1 << t
    xs = np.arange(size)
    terms = []
    for e in range(size):
        w = bin(e).count("1")
        flips = int(np.count_nonzero(f != f[xs ^ e]))
        terms.append(delta ** w * (1.0 - delta) ** (t - w) * flips)
    return math.fsum(terms) / size


def walsh_hadamard(values) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the last axis (length ``2^t``)."""
    a = np.array(values, dtype=np.float64)
    shape = a.shape
    size = shape[-1]
    h = 1
    while h < size:
        a = a.reshape(-1, size // (2 * h), 2, h)
        a = np.stack((a[:, :, 0] + a[:, :, 1], a[:, :, 0] - a[:, :, 1]), axis=2)
        h *= 2
    return a.reshape(shape)


def fourier_weights(f) -> np.ndarray:
    """``W^i[f]``: squared Fourier mass of the ``+-1`` version of ``f`` at each level ``i``."""
    f, t = _truth_table(f)
    coeffs = walsh_hadamard(1.0 - 2.0 * f) / f.size
    levels = np.array([bin(s).count("1") for s in range(f.size)])
    return np.array([math.fsum(coeffs[levels == i] ** 2) for i in range(t + 1)])


def noise_sensitivity_fourier(f, delta: float) -> float:
    W = fourier_weights(f)
    return 0.5 * math.fsum((1.0 - (1.0 - 2.0 * delta) ** i) * W[i] for i in range(W.size))


def local_noise_bound(tau: int, delta: float) -> float:
    return 0.5 * (1.0 - (1.0 - 2.0 * delta) ** tau)


# -- binomial vs hypergeometric --------------------------------------------

def tvd_binomial_hypergeometric_exact(N: int, k: int, t: int) -> Fraction:
    """Exact total variation between ``Bin(t, k/N)`` and ``Hyp(N, k, t)`` as a rational.

    Both pmfs are scaled to integers over the common denominator ``N^t C(N, t)``.
    """
    if N < 1 or not 0 <= k <= N or not 0 <= t <= N:
        raise InvalidParams("need N >= 1, 0 <= k <= N, 0 <= t <= N")
    c_nt = math.comb(N, t)
    diff = 0
    for s in range(t + 1):
        b = math.comb(t, s) * k ** s * (N - k) ** (t - s) * c_nt
        h = math.comb(k, s) * math.comb(N - k, t - s) * N ** t
        diff += abs(b - h)
    return Fraction(diff, 2 * N ** t * c_nt)


def tvd_binomial_hypergeometric(N: int, k: int, t: int) -> float:
    return float(tvd_binomial_hypergeometric_exact(N, k, t))


def tvd_bound(N: int, t: int) -> float:
    return math.inf if t >= N else 2.0 * t / math.sqrt(N - t)


# -- index-string rewriting --------------------------------------------------

def perturb_difference_exact_law(n: int, m: int) -> dict[tuple[int, ...], Fraction]:
    """Exact output law of the support-matching rewrite with ``y0`` uniform.

    Enumerates ``y0``, the uniform draw ``y1``, and every injection between
    the two set differences with its uniform weight.
    """
    if n < 1 or m < 1:
        raise InvalidParams("n and m must be positive")
    if n > 4 or m > 4:
        raise TooLarge("exact law is limited to n <= 4 and m <= 4")
    law: dict[tuple[int, ...], Fraction] = {}
    w_base = Fraction(1, 2 ** n * n ** m)
    for y0 in itertools.product((0, 1), repeat=n):
        s0 = {i for i in range(n) if y0[i]}
        for y1 in itertools.product(range(n), repeat=m):
            s1 = set(y1)
            a, b = sorted(s0 - s1), sorted(s1 - s0)
            if len(a) >= len(b):
                maps = [dict(zip(b, img)) for img in itertools.permutations(a, len(b))]
            else:
                # image of a inside b; every symbol tau(a) in y1 becomes a
                maps = [{img_i: ai for ai, img_i in zip(a, img)} for img in itertools.permutations(b, len(a))]
            w = w_base / len(maps)
            for mp in maps:
                out = tuple(mp.get(s, s) for s in y1)
                law[out] = law.get(out, Fraction(0)) + w
    return law


# -- token embedding -----------------------------------------------------------

def exact_embed_marginal(p, phi, prc_alphabet: int | None = None) -> list[Fraction]:
    """Law of the embedded token when the code symbol is uniform, in exact rationals.

    ``p`` may be a probability vector or any object with a ``probs`` array;
    floats are converted exactly, then renormalized.
    """
    probs = np.asarray(getattr(p, "probs", p), dtype=np.float64)
    phi = [int(v) for v in np.asarray(phi).reshape(-1)]
    K = max(phi) + 1 if prc_alphabet is None else prc_alphabet
    if len(probs) > 8 or K > 4:
        raise TooLarge("exact marginal is limited to |Sigma| <= 8 and a code alphabet of at most 4")
    if len(phi) != len(probs):
        raise InvalidParams("phi must have one entry per token")
    P = [Fraction(float(v)) for v in probs]
    total = sum(P, Fraction(0))
    P = [v / total for v in P]
    pbar = [sum((P[t] for t in range(len(P)) if phi[t] == y), Fraction(0)) for y in range(K)]
    inv_k = Fraction(1, K)
    resid = [max(v - inv_k, Fraction(0)) for v in pbar]
    R = sum(resid, Fraction(0))
    out = [Fraction(0)] * len(P)
    for x in range(K):
        keep = min(Fraction(1), K * pbar[x])
        y_law = [Fraction(0)] * K
        y_law[x] += keep
        if keep < 1:
            for y in range(K):
                y_law[y] += (1 - keep) * resid[y] / R
        for t in range(len(P)):
            if pbar[phi[t]] > 0:
                out[t] += inv_k * y_law[phi[t]] * P[t] / pbar[phi[t]]
    return out
