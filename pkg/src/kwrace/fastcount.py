"""Counting places of F_p(t) by Frobenius pattern for Kummer-shaped covers.

Handles defining polynomials ``X^{2k} + b(t) X^k + c(t)`` with ``k | p - 1``
and p odd.  Setting ``Y = X^k`` the reduction at a place of degree n splits
according to the roots of ``Y^2 + bY + c`` in F_{p^n}, and each ``X^k - y``
splits according to the class of y modulo k-th powers, which is read off a
discrete logarithm table of F_{p^n}.  One representative alpha per Galois
orbit of generators of F_{p^n} is visited, i.e. one per place of degree n.
"""
from __future__ import annotations

import numba
import numpy as np

from .gfpoly import primitive_poly


@numba.njit(cache=True)
def _digit_add(x, y, s, p, n):
    """Digit-wise (x + s*y) mod p on base-p encodings of field elements."""
    out = 0
    w = 1
    for _ in range(n):
        dx = x % p
        dy = y % p
        out += ((dx + s * dy) % p) * w
        x //= p
        y //= p
        w *= p
    return out


@numba.njit(cache=True)
def _build_tables(p, n, red, top_w):
    Q = p**n
    expt = np.empty(Q - 1, dtype=np.uint32)
    logt = np.full(Q, np.uint32(0xFFFFFFFF), dtype=np.uint32)
    cur = 1
    for k in range(Q - 1):
        expt[k] = cur
        logt[cur] = k
        top = cur // top_w
        shifted = (cur - top * top_w) * p
        cur = _digit_add(shifted, red[top], 1, p, n)
    return expt, logt, cur


@numba.njit(cache=True)
def _eval_poly(coeffs, L, expt, p, n, Qm1):
    """Encoding of sum_i coeffs[i] alpha^i for alpha = g^L."""
    acc = 0
    for i in range(coeffs.shape[0]):
        ci = coeffs[i] % p
        if ci != 0:
            acc = _digit_add(acc, np.int64(expt[(i * L) % Qm1]), ci, p, n)
    return acc


@numba.njit(cache=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@numba.njit(cache=True)
def _count_kernel(p, n, k, bco, cco, expt, logt):
    Q = p**n
    Qm1 = Q - 1
    split = np.zeros((k + 1, k + 1), dtype=np.int64)
    inert = np.zeros(k + 1, dtype=np.int64)
    ramified = 0
    places = 0
    half = (p + 1) // 2  # inverse of 2 mod p
    for L in range(1, Qm1):
        # keep L iff it is the strict minimum of its Frobenius orbit of size n
        keep = True
        Li = L
        for _ in range(n - 1):
            Li = (Li * p) % Qm1
            if Li <= L:
                keep = False
                break
        if not keep:
            continue
        places += 1
        b = _eval_poly(bco, L, expt, p, n, Qm1)
        c = _eval_poly(cco, L, expt, p, n, Qm1)
        if c == 0:
            ramified += 1
            continue
        logc = np.int64(logt[c])
        # D = b^2 - 4c
        if b == 0:
            b2 = 0
        else:
            b2 = np.int64(expt[(2 * np.int64(logt[b])) % Qm1])
        D = _digit_add(b2, c, p - 4 % p, p, n)
        if D == 0:
            ramified += 1
            continue
        logD = np.int64(logt[D])
        if logD % 2 == 0:
            sq = np.int64(expt[logD // 2])
            # y1 = (-b + sqrt D) / 2
            y1 = _digit_add(sq, b, p - 1, p, n)
            y1 = _digit_add(0, y1, half, p, n)
            l1 = np.int64(logt[y1])
            l2 = (logc - l1) % Qm1
            o1 = k // _gcd(l1 % k, k)
            o2 = k // _gcd(l2 % k, k)
            if o1 > o2:
                o1, o2 = o2, o1
            split[o1, o2] += 1
        else:
            o = k // _gcd(logc % k, k)
            inert[o] += 1
    return split, inert, ramified, places


def kummer_shape(defining_poly) -> tuple[int, list, list] | None:
    """``(k, b, c)`` if the polynomial is ``X^{2k} + b X^k + c``, else None."""
    F = []
    for c in defining_poly:
        c = list(c)
        while c and c[-1] == 0:
            c.pop()
        F.append(c)
    while F and not F[-1]:
        F.pop()
    top = len(F) - 1
    if top < 2 or top % 2:
        return None
    k = top // 2
    if F[-1] != [1]:
        return None
    for i, c in enumerate(F):
        if i not in (0, k, top) and any(c):
            return None
    return k, F[k] or [0], F[0] or [0]


def supports(p: int, defining_poly) -> bool:
    shape = kummer_shape(defining_poly)
    return p % 2 == 1 and shape is not None and (p - 1) % shape[0] == 0


def count_patterns(p: int, n: int, defining_poly) -> tuple[dict, int, int]:
    """``({pattern: count}, ramified, places)`` over places of degree n >= 2
    (places of degree 1 include the constant alpha = 0, handled elsewhere)."""
    if n < 2:
        raise ValueError("fast counting needs n >= 2")
    if not supports(p, defining_poly):
        raise ValueError("defining polynomial is not of supported Kummer shape")
    k, b, c = kummer_shape(defining_poly)
    m = primitive_poly(n, p)
    top_w = p ** (n - 1)
    # t^n = -(m_0 + ... + m_{n-1} t^{n-1}); red[s] encodes s * t^n
    low = [(-x) % p for x in m[:-1]]
    red = np.zeros(p, dtype=np.int64)
    for s in range(p):
        red[s] = sum(((s * x) % p) * p**i for i, x in enumerate(low))
    expt, logt, back = _build_tables(p, n, red, top_w)
    if back != 1:
        raise AssertionError("generator order check failed")
    split, inert, ramified, places = _count_kernel(
        p, n, k, np.array(b, dtype=np.int64), np.array(c, dtype=np.int64), expt, logt)
    del expt, logt
    out: dict = {}
    for o1 in range(1, k + 1):
        for o2 in range(o1, k + 1):
            cnt = int(split[o1, o2])
            if cnt:
                pat = tuple(sorted([o1] * (k // o1) + [o2] * (k // o2)))
                out[pat] = out.get(pat, 0) + cnt
    for o in range(1, k + 1):
        cnt = int(inert[o])
        if cnt:
            pat = tuple([2 * o] * (k // o))
            out[pat] = out.get(pat, 0) + cnt
    return out, int(ramified), int(places)
