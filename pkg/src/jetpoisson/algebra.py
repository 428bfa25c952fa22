"""Sparse exact arithmetic in a graded differential polynomial algebra.

The algebra is generated by even jet variables u[alpha,s] and odd (Grassmann)
jet variables th[alpha,s], alpha in 1..N, s >= 0, over exact rationals.  It
carries two gradations (standard degree = jet order, super degree = number of
odd factors) and a dispersion grading in even powers of a formal parameter,
truncated at a configurable bound.  The single variable u[1,1] may carry
negative exponents; everything else is polynomial.

Expressions are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from fractions import Fraction

EVEN = 0
ODD = 1

# A monomial is a pair (even, odd):
#   even: tuple of ((alpha, s), exponent), sorted by (alpha, s)
#   odd:  strictly increasing tuple of (alpha, s)
MONO_ONE = ((), ())

U11 = (1, 1)


class AlgebraError(ValueError):
    pass


class LaurentBoundError(AlgebraError):
    """A computation produced a u[1,1] exponent below the configured floor."""

    def __init__(self, exponent, floor):
        super().__init__(
            "u[1,1] exponent %d fell below the Laurent floor %d" % (exponent, floor)
        )
        self.exponent = exponent
        self.floor = floor


def _merge_odd(o1, o2):
    """Merge two sorted odd tuples; return (sign, merged) or None on collision."""
    if not o1:
        return 1, o2
    if not o2:
        return 1, o1
    merged = []
    sign = 1
    i = j = 0
    n1, n2 = len(o1), len(o2)
    while i < n1 and j < n2:
        a, b = o1[i], o2[j]
        if a == b:
            return None
        if a < b:
            merged.append(a)
            i += 1
        else:
            # b jumps over the remaining n1 - i elements of o1
            if (n1 - i) & 1:
                sign = -sign
            merged.append(b)
            j += 1
    merged.extend(o1[i:])
    merged.extend(o2[j:])
    return sign, tuple(merged)


def mono_mul(m1, m2):
    """Product of monomials: (sign, monomial) or None if an odd square appears."""
    e1, o1 = m1
    e2, o2 = m2
    res = _merge_odd(o1, o2)
    if res is None:
        return None
    sign, odd = res
    if not e1:
        return sign, (e2, odd)
    if not e2:
        return sign, (e1, odd)
    exps = dict(e1)
    for v, e in e2:
        ne = exps.get(v, 0) + e
        if ne:
            exps[v] = ne
        else:
            del exps[v]
    return sign, (tuple(sorted(exps.items())), odd)


def mono_std(m):
    even, odd = m
    d = 0
    for (_, s), e in even:
        d += s * e
    for _, s in odd:
        d += s
    return d


def mono_sup(m):
    return len(m[1])


def mono_count(m):
    """Total number of variable factors, counting exponents with sign."""
    even, odd = m
    return sum(e for _, e in even) + len(odd)


def mono_maxjet(m):
    even, odd = m
    j = 0
    for (_, s), _ in even:
        if s > j:
            j = s
    for _, s in odd:
        if s > j:
            j = s
    return j


def mono_u11(m):
    """Exponent of u[1,1] (0 if absent)."""
    for v, e in m[0]:
        if v == U11:
            return e
    return 0


def mono_u0_degree(m):
    """Total exponent of undifferentiated even variables u[alpha,0]."""
    d = 0
    for (_, s), e in m[0]:
        if s == 0:
            d += e
    return d


def mono_str(m):
    even, odd = m
    parts = []
    for (a, s), e in even:
        v = "u[%d,%d]" % (a, s)
        parts.append(v if e == 1 else "%s^%d" % (v, e))
    for a, s in odd:
        parts.append("th[%d,%d]" % (a, s))
    return "*".join(parts) if parts else "1"


def mono_sort_key(m):
    """Deterministic total order used for canonical printing."""
    return (mono_std(m), m[0], m[1])


def _pivot_key(m):
    """Order used to pick pivots in slice reduction: deepest structure first."""
    return (mono_maxjet(m), -mono_u11(m), m[0], m[1])


class GradeSignature(tuple):
    """(standard degree, super degree, dispersion order 2g)."""

    __slots__ = ()

    def __new__(cls, std, sup, eps):
        return tuple.__new__(cls, (std, sup, eps))

    @property
    def std(self):
        return self[0]

    @property
    def sup(self):
        return self[1]

    @property
    def eps(self):
        return self[2]

    def __repr__(self):
        return "GradeSignature(std=%d, sup=%d, eps=%d)" % self


class JetAlgebra:
    """Context object: dimension, dispersion truncation and Laurent floor.

    ``coeff_degree`` optionally truncates the total degree in the
    undifferentiated variables u[alpha,0]; dropped products are counted in
    ``truncation_events`` so callers can report truncation sensitivity.
    """

    def __init__(self, n, gmax, laurent_min=-40, coeff_degree=None):
        if n < 1:
            raise AlgebraError("dimension must be >= 1")
        if gmax < 0:
            raise AlgebraError("dispersion truncation must be >= 0")
        self.n = n
        self.gmax = gmax
        self.laurent_min = laurent_min
        self.coeff_degree = coeff_degree
        self.truncation_events = 0
        self._dx_cache = {}
        self._slice_cache = {}

    # -- factories ---------------------------------------------------------

    def zero(self):
        return DiffExpr(self, {})

    def const(self, c, g=0):
        c = Fraction(c)
        if not c:
            return self.zero()
        return DiffExpr(self, {g: {MONO_ONE: c}})

    def one(self):
        return self.const(1)

    def u(self, alpha, s, exp=1, g=0):
        self._check_var(alpha, s)
        if exp == 0:
            return self.const(1, g)
        if exp < 0 and (alpha, s) != U11:
            raise AlgebraError("only u[1,1] may carry a negative exponent")
        if exp < self.laurent_min:
            raise LaurentBoundError(exp, self.laurent_min)
        mono = ((((alpha, s), exp),), ())
        return DiffExpr(self, {g: {mono: Fraction(1)}})

    def th(self, alpha, s, g=0):
        self._check_var(alpha, s)
        mono = ((), ((alpha, s),))
        return DiffExpr(self, {g: {mono: Fraction(1)}})

    def monomial(self, mono, coeff=1, g=0):
        coeff = Fraction(coeff)
        if not coeff:
            return self.zero()
        return DiffExpr(self, {g: {mono: coeff}})

    def _check_var(self, alpha, s):
        if not (1 <= alpha <= self.n):
            raise AlgebraError("index %d out of range 1..%d" % (alpha, self.n))
        if s < 0:
            raise AlgebraError("jet order must be >= 0")

    def compatible(self, other):
        return self.n == other.n and self.gmax == other.gmax

    # -- monomial calculus (cached per algebra) ------------------------------

    def mono_dx(self, m):
        """Total derivative of a monomial as a list of (coeff, monomial)."""
        cached = self._dx_cache.get(m)
        if cached is not None:
            return cached
        even, odd = m
        out = []
        for i, ((a, s), e) in enumerate(even):
            raised = (a, s + 1)
            exps = dict(even)
            ne = exps.get((a, s), 0) - 1
            if ne:
                exps[(a, s)] = ne
            else:
                del exps[(a, s)]
            nr = exps.get(raised, 0) + 1
            if nr:
                exps[raised] = nr
            else:
                del exps[raised]
            if ne < 0 and (a, s) == U11 and ne < self.laurent_min:
                raise LaurentBoundError(ne, self.laurent_min)
            out.append((Fraction(e), (tuple(sorted(exps.items())), odd)))
        for i, (a, s) in enumerate(odd):
            raised = (a, s + 1)
            if raised in odd:
                continue
            # (a, s+1) is order-adjacent to (a, s): in-place replacement keeps
            # the odd tuple sorted and costs no sign
            new_odd = odd[:i] + (raised,) + odd[i + 1 :]
            out.append((Fraction(1), (even, new_odd)))
        out = tuple(out)
        self._dx_cache[m] = out
        return out


class DiffExpr:
    """Element of the algebra: dispersion-graded sparse sum of monomials."""

    __slots__ = ("alg", "parts")

    def __init__(self, alg, parts):
        self.alg = alg
        self.parts = parts

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def _cleaned(alg, parts):
        clean = {}
        for g, terms in parts.items():
            if g > alg.gmax or not terms:
                continue
            t = {m: c for m, c in terms.items() if c}
            if t:
                clean[g] = t
        return DiffExpr(alg, clean)

    # -- predicates ----------------------------------------------------------

    @property
    def is_zero(self):
        return not self.parts

    def eps_orders(self):
        return sorted(self.parts)

    def eps_piece(self, g):
        """The homogeneous dispersion piece of order 2g, kept at that order."""
        terms = self.parts.get(g)
        if not terms:
            return self.alg.zero()
        return DiffExpr(self.alg, {g: dict(terms)})

    def drop_eps(self):
        """Collapse every dispersion order to order 0 (forget the grading)."""
        acc = {}
        for terms in self.parts.values():
            for m, c in terms.items():
                nc = acc.get(m, 0) + c
                if nc:
                    acc[m] = nc
                else:
                    acc.pop(m, None)
        return DiffExpr(self.alg, {0: acc} if acc else {})

    def shift_eps(self, dg):
        """Multiply by the 2*dg power of the dispersion parameter."""
        parts = {}
        for g, terms in self.parts.items():
            ng = g + dg
            if 0 <= ng <= self.alg.gmax:
                parts[ng] = dict(terms)
        return DiffExpr(self.alg, parts)

    def term_count(self):
        return sum(len(t) for t in self.parts.values())

    # -- ring operations -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.alg.const(other)
        if self.alg is not other.alg and not self.alg.compatible(other.alg):
            raise AlgebraError("dimension mismatch")
        parts = {g: dict(t) for g, t in self.parts.items()}
        for g, terms in other.parts.items():
            dst = parts.setdefault(g, {})
            for m, c in terms.items():
                nc = dst.get(m, 0) + c
                if nc:
                    dst[m] = nc
                else:
                    del dst[m]
        return DiffExpr._cleaned(self.alg, parts)

    __radd__ = __add__

    def __neg__(self):
        return DiffExpr(
            self.alg,
            {g: {m: -c for m, c in t.items()} for g, t in self.parts.items()},
        )

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.alg.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = Fraction(c)
        if not c:
            return self.alg.zero()
        return DiffExpr(
            self.alg,
            {g: {m: c * v for m, v in t.items()} for g, t in self.parts.items()},
        )

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if self.alg is not other.alg and not self.alg.compatible(other.alg):
            raise AlgebraError("dimension mismatch")
        alg = self.alg
        gmax = alg.gmax
        floor = alg.laurent_min
        mv = alg.coeff_degree
        parts = {}
        for g1, t1 in self.parts.items():
            for g2, t2 in other.parts.items():
                g = g1 + g2
                if g > gmax:
                    continue
                dst = parts.setdefault(g, {})
                for m1, c1 in t1.items():
                    for m2, c2 in t2.items():
                        res = mono_mul(m1, m2)
                        if res is None:
                            continue
                        sign, m = res
                        u11 = mono_u11(m)
                        if u11 < floor:
                            raise LaurentBoundError(u11, floor)
                        if mv is not None and mono_u0_degree(m) > mv:
                            alg.truncation_events += 1
                            continue
                        c = c1 * c2 if sign > 0 else -(c1 * c2)
                        nc = dst.get(m, 0) + c
                        if nc:
                            dst[m] = nc
                        else:
                            del dst[m]
        return DiffExpr._cleaned(alg, parts)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k):
        if k < 0:
            raise AlgebraError("negative powers only via explicit u[1,1] monomials")
        out = self.alg.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, DiffExpr):
            if isinstance(other, (int, Fraction)):
                return self == self.alg.const(other)
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self):
        return hash(
            tuple(
                (g, tuple(sorted(t.items(), key=lambda kv: mono_sort_key(kv[0]))))
                for g, t in sorted(self.parts.items())
            )
        )

    # -- calculus ------------------------------------------------------------

    def dx(self, times=1):
        expr = self
        for _ in range(times):
            alg = expr.alg
            parts = {}
            for g, terms in expr.parts.items():
                dst = parts.setdefault(g, {})
                for m, c in terms.items():
                    for k, dm in alg.mono_dx(m):
                        nc = dst.get(dm, 0) + c * k
                        if nc:
                            dst[dm] = nc
                        else:
                            del dst[dm]
            expr = DiffExpr._cleaned(alg, parts)
        return expr

    def partial(self, alpha, s, parity=EVEN):
        """Left partial derivative with respect to u[alpha,s] or th[alpha,s]."""
        alg = self.alg
        var = (alpha, s)
        parts = {}
        for g, terms in self.parts.items():
            dst = parts.setdefault(g, {})
            for (even, odd), c in terms.items():
                if parity == EVEN:
                    e = dict(even).get(var)
                    if not e:
                        continue
                    exps = dict(even)
                    ne = e - 1
                    if ne:
                        exps[var] = ne
                    else:
                        del exps[var]
                    m = (tuple(sorted(exps.items())), odd)
                    nc = dst.get(m, 0) + c * e
                else:
                    if var not in odd:
                        continue
                    pos = odd.index(var)
                    m = (even, odd[:pos] + odd[pos + 1 :])
                    sign = -1 if pos & 1 else 1
                    nc = dst.get(m, 0) + c * sign
                if nc:
                    dst[m] = nc
                else:
                    del dst[m]
        return DiffExpr._cleaned(alg, parts)

    def var_deriv(self, gamma, parity=EVEN):
        """Variational derivative: alternating-sign total derivatives of partials."""
        out = self.alg.zero()
        p = 0
        maxjet = self.max_jet()
        while p <= maxjet:
            term = self.partial(gamma, p, parity)
            if not term.is_zero:
                term = term.dx(p)
                out = out + term if p % 2 == 0 else out - term
            p += 1
        return out

    def grade(self):
        """GradeSignature if homogeneous in all three degrees, else None."""
        sig = None
        for g, terms in self.parts.items():
            for m in terms:
                s = GradeSignature(mono_std(m), mono_sup(m), 2 * g)
                if sig is None:
                    sig = s
                elif sig != s:
                    return None
        return sig

    def max_jet(self):
        j = 0
        for terms in self.parts.values():
            for m in terms:
                mj = mono_maxjet(m)
                if mj > j:
                    j = mj
        return j

    def min_u11(self):
        e = 0
        for terms in self.parts.values():
            for m in terms:
                u = mono_u11(m)
                if u < e:
                    e = u
        return e

    def is_polynomial(self):
        return self.min_u11() >= 0

    # -- canonical text form ---------------------------------------------------

    def __str__(self):
        if self.is_zero:
            return "0"
        chunks = []
        for g in sorted(self.parts):
            terms = sorted(self.parts[g].items(), key=lambda kv: mono_sort_key(kv[0]))
            for m, c in terms:
                body = mono_str(m)
                if g:
                    body = "eps^%d*%s" % (2 * g, body) if body != "1" else "eps^%d" % (2 * g)
                if body == "1":
                    chunks.append(str(c))
                elif c == 1:
                    chunks.append(body)
                elif c == -1:
                    chunks.append("-%s" % body)
                else:
                    chunks.append("%s*%s" % (c, body))
        out = chunks[0]
        for ch in chunks[1:]:
            out += " - " + ch[1:] if ch.startswith("-") else " + " + ch
        return out

    def __repr__(self):
        return "<DiffExpr %s>" % self


def enum_slice_monomials(alg, std, sup, count, maxjet, min_e11):
    """All monomials with the given (std, sup, count) signature and bounds.

    Only u[1,1] may take exponents below zero (down to ``min_e11``); all
    other exponents are non-negative.  Jet orders run up to ``maxjet``.
    """
    from itertools import combinations

    if maxjet < 0:
        return
    n = alg.n
    # canonical order, so combinations yield valid ascending odd tuples
    odd_vars = sorted((a, s) for s in range(maxjet + 1) for a in range(1, n + 1))
    # heaviest jets first so std is consumed early and pruning bites
    even_vars = sorted(
        ((a, s) for s in range(maxjet + 1) for a in range(1, n + 1) if (a, s) != U11),
        key=lambda v: -v[1],
    )
    lo11 = min(min_e11, 0)

    for odd in combinations(odd_vars, sup):
        ostd = sum(s for _, s in odd)
        rem_std0 = std - ostd
        rem_cnt0 = count - sup
        if maxjet >= 1:
            e11_hi = min(rem_std0, rem_cnt0)
            e11_range = range(lo11, e11_hi + 1)
        else:
            e11_range = (0,) if rem_std0 >= 0 else ()
        for e11 in e11_range:
            rem_std = rem_std0 - e11
            rem_cnt = rem_cnt0 - e11
            if rem_std < 0 or rem_cnt < 0:
                continue
            base = ((U11, e11),) if e11 else ()
            stack = [(0, rem_std, rem_cnt, base)]
            while stack:
                i, rstd, rcnt, acc = stack.pop()
                if rstd == 0 and rcnt == 0:
                    yield (tuple(sorted(acc)), odd)
                    continue
                if i >= len(even_vars) or rcnt <= 0:
                    continue
                a, s = even_vars[i]
                if s == 0:
                    if rstd != 0:
                        continue  # later variables are all jet 0 and carry no std
                    emax = rcnt
                else:
                    emax = min(rstd // s, rcnt)
                for e in range(emax + 1):
                    nacc = acc + (((a, s), e),) if e else acc
                    stack.append((i + 1, rstd - e * s, rcnt - e, nacc))
