"""Truncated multivariate power series in the coupling times.

Variables are t[alpha, d] with alpha in 1..N and d bounded by the series
context.  Coefficients are exact rationals.  Every series carries an
``order``: coefficients of total degree up to ``order`` are exact, anything
beyond is dropped.  The distinguished derivative ``dx`` acts as the partial
derivative in t[1, 0].
"""

from __future__ import annotations

from fractions import Fraction

ORDER_INF = 10 ** 9

# monomial: tuple of ((alpha, d), exponent), sorted


def _mono_deg(m):
    return sum(e for _, e in m)


def _mono_mul(m1, m2):
    if not m1:
        return m2
    if not m2:
        return m1
    exps = dict(m1)
    for v, e in m2:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted(exps.items()))


def _mono_str(m):
    if not m:
        return "1"
    parts = []
    for (a, d), e in m:
        v = "t[%d,%d]" % (a, d)
        parts.append(v if e == 1 else "%s^%d" % (v, e))
    return "*".join(parts)


class TSeries:
    __slots__ = ("n", "terms", "order")

    def __init__(self, n, terms, order):
        self.n = n
        self.terms = terms
        self.order = order

    @classmethod
    def zero(cls, n, order=ORDER_INF):
        return cls(n, {}, order)

    @classmethod
    def const(cls, n, c, order=ORDER_INF):
        c = Fraction(c)
        return cls(n, {(): c} if c else {}, order)

    @classmethod
    def var(cls, n, alpha, d, order=ORDER_INF):
        return cls(n, {(((alpha, d), 1),): Fraction(1)}, order)

    @classmethod
    def make(cls, n, terms, order):
        clean = {m: c for m, c in terms.items() if c and _mono_deg(m) <= order}
        return cls(n, clean, order)

    @property
    def is_zero(self):
        return not self.terms

    def coeff(self, mono):
        return self.terms.get(tuple(sorted(mono)), Fraction(0))

    def constant_term(self):
        return self.terms.get((), Fraction(0))

    def truncate(self, order):
        if order >= self.order:
            return TSeries(self.n, self.terms, min(order, self.order))
        return TSeries.make(self.n, self.terms, order)

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TSeries.const(self.n, other)
        order = min(self.order, other.order)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            nc = terms.get(m, 0) + c
            if nc:
                terms[m] = nc
            else:
                del terms[m]
        return TSeries.make(self.n, terms, order)

    __radd__ = __add__

    def __neg__(self):
        return TSeries(self.n, {m: -c for m, c in self.terms.items()}, self.order)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TSeries.const(self.n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = Fraction(c)
        if not c:
            return TSeries.zero(self.n, self.order)
        return TSeries(self.n, {m: c * v for m, v in self.terms.items()}, self.order)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        order = min(self.order, other.order)
        # degree-sorted right factor allows an early exit per left term
        left = []
        for m, c in self.terms.items():
            d = _mono_deg(m)
            if d <= order:
                left.append((d, m, c))
        right = []
        for m, c in other.terms.items():
            d = _mono_deg(m)
            if d <= order:
                right.append((d, m, c))
        right.sort(key=lambda t: t[0])
        out = {}
        for d1, m1, c1 in left:
            lim = order - d1
            for d2, m2, c2 in right:
                if d2 > lim:
                    break
                m = _mono_mul(m1, m2)
                c = c1 * c2
                nc = out.get(m, 0) + c
                if nc:
                    out[m] = nc
                else:
                    del out[m]
        return TSeries(self.n, out, order)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k):
        out = TSeries.const(self.n, 1, self.order)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def diff(self, alpha, d):
        """Partial derivative in t[alpha, d]; exactness drops by one degree."""
        var = (alpha, d)
        out = {}
        for m, c in self.terms.items():
            exps = dict(m)
            e = exps.get(var)
            if not e:
                continue
            if e == 1:
                del exps[var]
            else:
                exps[var] = e - 1
            nm = tuple(sorted(exps.items()))
            out[nm] = out.get(nm, 0) + c * e
        return TSeries.make(self.n, out, self.order - 1)

    def dx(self, times=1):
        out = self
        for _ in range(times):
            out = out.diff(1, 0)
        return out

    def mul_var(self, alpha, d):
        """Multiply by t[alpha, d]; cheap special case of multiplication."""
        out = {}
        var = (alpha, d)
        for m, c in self.terms.items():
            exps = dict(m)
            exps[var] = exps.get(var, 0) + 1
            out[tuple(sorted(exps.items()))] = c
        return TSeries.make(self.n, out, self.order)

    def inverse(self):
        """Multiplicative inverse; requires a nonzero constant term."""
        c0 = self.constant_term()
        if not c0:
            raise ZeroDivisionError("series has no constant term")
        if len(self.terms) == 1 and () in self.terms:
            return TSeries(self.n, {(): Fraction(1) / c0}, self.order)
        if self.order >= ORDER_INF:
            raise ValueError("inverse needs a finite truncation order")
        x = self.scale(Fraction(1) / c0) - 1
        # geometric series; x has positive valuation so powers terminate
        out = TSeries.const(self.n, 1, self.order)
        xk = TSeries.const(self.n, 1, self.order)
        sign = 1
        for _ in range(self.order):
            xk = xk * x
            if xk.is_zero:
                break
            sign = -sign
            out = out + (xk if sign > 0 else -xk)
        return out.scale(Fraction(1) / c0)

    def is_zero_through(self, order):
        lim = min(order, self.order)
        return all(_mono_deg(m) > lim for m in self.terms)

    def max_nonzero_degree(self):
        return max((_mono_deg(m) for m in self.terms), default=-1)

    def monomials_through(self, order):
        lim = min(order, self.order)
        return [m for m in self.terms if _mono_deg(m) <= lim]

    def __eq__(self, other):
        if not isinstance(other, TSeries):
            return NotImplemented
        lim = min(self.order, other.order)
        for m in set(self.terms) | set(other.terms):
            if _mono_deg(m) <= lim and self.terms.get(m, 0) != other.terms.get(m, 0):
                return False
        return True

    def __hash__(self):
        raise TypeError("unhashable")

    def __str__(self):
        if not self.terms:
            return "0"
        items = sorted(self.terms.items(), key=lambda kv: (_mono_deg(kv[0]), kv[0]))
        chunks = []
        for m, c in items[:24]:
            body = _mono_str(m)
            chunks.append(str(c) if body == "1" else "%s*%s" % (c, body))
        tail = " + ..." if len(items) > 24 else ""
        return " + ".join(chunks) + tail

    __repr__ = __str__
