"""Polynomials over a prime field F_p and over its extensions F_p[t]/(P).

Polynomials are tuples of coefficients, lowest degree first, with no
trailing zeros (the zero polynomial is ``()``).  This layer is written for
clarity, not speed; degree-10 counting goes through :mod:`kwrace.fastcount`.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Iterator, Sequence

Poly = tuple


def trim(a: Sequence[int], p: int) -> Poly:
    a = [x % p for x in a]
    while a and a[-1] == 0:
        a.pop()
    return tuple(a)


def deg(a: Poly) -> int:
    return len(a) - 1


def add(a: Poly, b: Poly, p: int) -> Poly:
    n = max(len(a), len(b))
    return trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)], p)


def sub(a: Poly, b: Poly, p: int) -> Poly:
    n = max(len(a), len(b))
    return trim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)], p)


def scale(a: Poly, s: int, p: int) -> Poly:
    return trim([x * s for x in a], p)


def mul(a: Poly, b: Poly, p: int) -> Poly:
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return trim(out, p)


def divmod_(a: Poly, b: Poly, p: int) -> tuple[Poly, Poly]:
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    r = list(a)
    inv = pow(b[-1], -1, p)
    q = [0] * max(len(a) - len(b) + 1, 0)
    while len(r) >= len(b) and r:
        c = r[-1] * inv % p
        shift = len(r) - len(b)
        q[shift] = c
        for i, y in enumerate(b):
            r[shift + i] = (r[shift + i] - c * y) % p
        while r and r[-1] == 0:
            r.pop()
    return trim(q, p), tuple(r)


def mod(a: Poly, b: Poly, p: int) -> Poly:
    return divmod_(a, b, p)[1]


def monic(a: Poly, p: int) -> Poly:
    if not a:
        return a
    return scale(a, pow(a[-1], -1, p), p)


def gcd(a: Poly, b: Poly, p: int) -> Poly:
    while b:
        a, b = b, mod(a, b, p)
    return monic(a, p)


def powmod(a: Poly, e: int, m: Poly, p: int) -> Poly:
    result: Poly = (1,)
    base = mod(a, m, p)
    while e:
        if e & 1:
            result = mod(mul(result, base, p), m, p)
        base = mod(mul(base, base, p), m, p)
        e >>= 1
    return mod(result, m, p)


def prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def is_irreducible(f: Poly, p: int) -> bool:
    """Rabin's test for a polynomial of degree >= 1."""
    n = deg(f)
    if n < 1:
        return False
    if n == 1:
        return True
    f = monic(f, p)
    x = (0, 1)
    for r in prime_factors(n):
        h = powmod(x, p ** (n // r), f, p)
        if deg(gcd(sub(h, x, p), f, p)) > 0:
            return False
    return powmod(x, p**n, f, p) == x


def monic_polys(n: int, p: int) -> Iterator[Poly]:
    for coeffs in itertools.product(range(p), repeat=n):
        yield tuple(coeffs) + (1,)


def monic_irreducibles(n: int, p: int) -> Iterator[Poly]:
    for f in monic_polys(n, p):
        if is_irreducible(f, p):
            yield f


def mobius(n: int) -> int:
    res = 1
    for r in prime_factors(n):
        if (n // r) % r == 0:
            return 0
        res = -res
    return res


def necklace(n: int, q: int) -> int:
    """Number of monic irreducible polynomials of degree n over F_q."""
    total = sum(mobius(d) * q ** (n // d) for d in range(1, n + 1) if n % d == 0)
    return total // n


def is_primitive(f: Poly, p: int) -> bool:
    """True if t generates (F_p[t]/f)^* (f monic irreducible)."""
    if not is_irreducible(f, p):
        return False
    order = p ** deg(f) - 1
    t = (0, 1)
    return all(powmod(t, order // r, f, p) != (1,) for r in prime_factors(order))


@lru_cache(maxsize=None)
def primitive_poly(n: int, p: int) -> Poly:
    """First monic primitive polynomial of degree n found (constant term varies fastest)."""
    for coeffs in itertools.product(range(p), repeat=n):
        f = tuple(reversed(coeffs)) + (1,)
        if f[0] != 0 and is_primitive(f, p):
            return f
    raise ValueError("no primitive polynomial found")


# ---------------------------------------------------------------------------
# polynomials in X over the residue field F_p[t]/(P)


class ResidueField:
    """F_p[t]/(P) for a monic irreducible P; elements are reduced Polys."""

    def __init__(self, P: Poly, p: int, check: bool = True):
        self.P = monic(P, p)
        if check and not is_irreducible(self.P, p):
            raise ValueError(f"{tuple(P)} is not irreducible mod {p}")
        self.p = p
        self.n = deg(self.P)
        self.order = p**self.n

    def red(self, a) -> Poly:
        return mod(trim(a, self.p), self.P, self.p)

    def mul(self, a, b):
        return mod(mul(a, b, self.p), self.P, self.p)

    def inv(self, a):
        if not a:
            raise ZeroDivisionError("zero has no inverse")
        return powmod(a, self.order - 2, self.P, self.p)


def _xtrim(a: list) -> list:
    while a and not a[-1]:
        a.pop()
    return a


def xpoly_reduce(F: Sequence[Sequence[int]], K: ResidueField) -> list:
    """Reduce coefficients (given as polynomials in t) into the residue field."""
    return _xtrim([K.red(c) for c in F])


def xadd(a, b, K):
    n = max(len(a), len(b))
    return _xtrim([add(a[i] if i < len(a) else (), b[i] if i < len(b) else (), K.p) for i in range(n)])


def xsub(a, b, K):
    n = max(len(a), len(b))
    return _xtrim([sub(a[i] if i < len(a) else (), b[i] if i < len(b) else (), K.p) for i in range(n)])


def xmul(a, b, K):
    if not a or not b:
        return []
    out = [()] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if not x:
            continue
        for j, y in enumerate(b):
            if y:
                out[i + j] = add(out[i + j], mul(x, y, K.p), K.p)
    return _xtrim([K.red(c) for c in out])


def xdivmod(a, b, K):
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    r = list(a)
    inv = K.inv(b[-1])
    q = [()] * max(len(a) - len(b) + 1, 0)
    while len(r) >= len(b) and r:
        c = K.mul(r[-1], inv)
        shift = len(r) - len(b)
        q[shift] = c
        for i, y in enumerate(b):
            r[shift + i] = sub(r[shift + i], K.mul(c, y), K.p)
        _xtrim(r)
    return _xtrim(q), r


def xmod(a, b, K):
    return xdivmod(a, b, K)[1]


def xmonic(a, K):
    if not a:
        return a
    inv = K.inv(a[-1])
    return [K.mul(c, inv) for c in a]


def xgcd(a, b, K):
    while b:
        a, b = b, xmod(a, b, K)
    return xmonic(a, K)


def xderiv(a, K):
    return _xtrim([scale(c, i, K.p) for i, c in enumerate(a)][1:])


def xpowmod(a, e: int, m, K):
    result = [(1,)]
    base = xmod(a, m, K)
    while e:
        if e & 1:
            result = xmod(xmul(result, base, K), m, K)
        base = xmod(xmul(base, base, K), m, K)
        e >>= 1
    return xmod(result, m, K)


def factor_degrees(F, K: ResidueField) -> list[int] | None:
    """Degrees of the irreducible factors of a monic F over K, by distinct-degree
    factorisation; None if F is not squarefree."""
    F = xmonic(F, K)
    if len(xgcd(F, xderiv(F, K), K)) > 1:
        return None
    degrees: list[int] = []
    rest = F
    x = [(), (1,)]
    h = x
    i = 0
    while len(rest) - 1 >= 2 * (i + 1):
        i += 1
        h = xpowmod(h, K.order, rest, K)
        g = xgcd(xsub(h, x, K), rest, K)
        dg = len(g) - 1
        if dg > 0:
            degrees += [i] * (dg // i)
            rest = xdivmod(rest, g, K)[0]
            h = xmod(h, rest, K)
    if len(rest) - 1 > 0:
        degrees.append(len(rest) - 1)
    return sorted(degrees)
