"""Correlator tables: storage, generation, and consistency certification.

Tables hold integrated intersection numbers <prod tau_{d_i}(e_{a_i})>_g with
exact rational values, keyed by multisets.  The one-dimensional table is
generated from the standard recursion for psi-class intersections; tables in
higher dimension are ingested from files and certified against the universal
identities (string, dilaton, associativity, genus-0 topological recursion,
homogeneity) rather than trusted.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache

from .tseries import TSeries


class TableError(ValueError):
    pass


class BoundsError(TableError):
    """A computation needs table entries beyond the generated bounds."""


# ---------------------------------------------------------------------------
# psi-class intersection numbers in dimension one


def _doublefact(k):
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


@lru_cache(maxsize=None)
def _psi_rec(g, key):
    """Recursion kernel in double-factorial normalization.

    key is the sorted tuple of indices; the value divided by the product of
    (2d+1)!! over the indices is the intersection number.
    """
    n = len(key)
    if g < 0 or 2 * g - 2 + n <= 0 or sum(key) != 3 * g - 3 + n:
        return Fraction(0)
    if (g, n) == (0, 3):
        return Fraction(1)
    if (g, n) == (1, 1):
        return Fraction(1, 8)
    i, rest = key[0], key[1:]

    total = Fraction(0)
    # trade the pivot against one other insertion
    for j, dj in enumerate(rest):
        a = i + dj - 1
        if a < 0:
            continue
        child = tuple(sorted((a,) + rest[:j] + rest[j + 1 :]))
        total += (2 * dj + 1) * _psi_rec(g, child)

    if i >= 2:
        half = Fraction(0)
        # nonseparating reduction
        for a in range(i - 1):
            b = i - 2 - a
            half += _psi_rec(g - 1, tuple(sorted((a, b) + rest)))
        # separating reductions over all splittings
        m = len(rest)
        for bits in range(1 << m):
            part1 = tuple(rest[t] for t in range(m) if bits >> t & 1)
            part2 = tuple(rest[t] for t in range(m) if not bits >> t & 1)
            for a in range(i - 1):
                b = i - 2 - a
                for g1 in range(g + 1):
                    f1 = _psi_rec(g1, tuple(sorted((a,) + part1)))
                    if not f1:
                        continue
                    f2 = _psi_rec(g - g1, tuple(sorted((b,) + part2)))
                    if f2:
                        half += f1 * f2
        total += half / 2
    return total


def psi_intersection(g, degrees):
    """<tau_{d_1} ... tau_{d_n}>_g for the one-dimensional trivial theory."""
    key = tuple(sorted(degrees))
    n = len(key)
    if 2 * g - 2 + n <= 0:
        raise TableError("unstable range (g, n) = (%d, %d)" % (g, n))
    if sum(key) != 3 * g - 3 + n:
        return Fraction(0)
    norm = 1
    for d in key:
        norm *= _doublefact(2 * d + 1)
    return _psi_rec(g, key) / norm


# ---------------------------------------------------------------------------
# the table


class CorrelatorTable:
    """Finite store of correlators with multiset keys.

    entries maps (g, pairs) to a rational, where pairs is the sorted tuple of
    (alpha, d) insertions.  Zero values inside the declared bounds are simply
    absent.
    """

    def __init__(self, n, eta, entries, gmax, nmax, dmax):
        self.n = n
        self.eta = tuple(tuple(Fraction(x) for x in row) for row in eta)
        if self.eta != tuple(tuple(r) for r in zip(*self.eta)):
            raise TableError("the pairing must be symmetric")
        self.eta_inv = _invert_matrix(self.eta)
        self.entries = {}
        for (g, pairs), val in entries.items():
            val = Fraction(val)
            if val:
                self.entries[(g, tuple(sorted(pairs)))] = val
        self.gmax = gmax
        self.nmax = nmax
        self.dmax = dmax
        self._axiom_triple_check()

    def _axiom_triple_check(self):
        for a in range(1, self.n + 1):
            for b in range(1, self.n + 1):
                got = self.corr(0, ((a, 0), (b, 0), (1, 0)))
                if got != self.eta[a - 1][b - 1]:
                    raise TableError(
                        "three-point pairing axiom violated at (%d, %d): %s" % (a, b, got)
                    )

    def corr(self, g, pairs):
        return self.entries.get((g, tuple(sorted(pairs))), Fraction(0))

    def within_bounds(self, g, pairs):
        return (
            g <= self.gmax
            and len(pairs) <= self.nmax
            and all(d <= self.dmax for _, d in pairs)
        )

    # -- series assembly ----------------------------------------------------

    def genus_potential(self, g):
        """F_g as a truncated series, exact through degree nmax."""
        if g > self.gmax:
            raise BoundsError("genus %d beyond table bound %d" % (g, self.gmax))
        terms = {}
        for (gg, pairs), val in self.entries.items():
            if gg != g:
                continue
            mono = {}
            denom = 1
            for key, grp in itertools.groupby(pairs):
                k = len(list(grp))
                mono[key] = k
                for j in range(2, k + 1):
                    denom *= j
            terms[tuple(sorted(mono.items()))] = val / denom
        return TSeries.make(self.n, terms, self.nmax)

    # -- io -------------------------------------------------------------------

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def dumps(self):
        lines = ["N %d" % self.n]
        lines.append(
            "eta " + " ".join(str(self.eta[a][b]) for a in range(self.n) for b in range(self.n))
        )
        lines.append("bounds %d %d %d" % (self.gmax, self.nmax, self.dmax))
        recs = []
        for (g, pairs), val in self.entries.items():
            recs.append((g, len(pairs), pairs, val))
        recs.sort()
        for g, _, pairs, val in recs:
            body = " ".join("(%d,%d)" % p for p in pairs)
            lines.append("%d; %s; %s" % (g, body, val))
        return "\n".join(lines) + "\n"

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            text = fh.read()
        return cls.loads(text)

    @classmethod
    def loads(cls, text):
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("N "):
            raise TableError("missing dimension header")
        n = int(lines[0].split()[1])
        if not lines[1].startswith("eta "):
            raise TableError("missing pairing header")
        vals = [Fraction(x) for x in lines[1].split()[1:]]
        if len(vals) != n * n:
            raise TableError("pairing needs %d entries" % (n * n))
        eta = tuple(tuple(vals[a * n + b] for b in range(n)) for a in range(n))
        idx = 2
        gmax = nmax = dmax = None
        if idx < len(lines) and lines[idx].startswith("bounds "):
            gmax, nmax, dmax = (int(x) for x in lines[idx].split()[1:4])
            idx += 1
        entries = {}
        for ln in lines[idx:]:
            gpart, body, valpart = (x.strip() for x in ln.split(";"))
            g = int(gpart)
            pairs = []
            for tok in body.split():
                a, d = tok.strip("()").split(",")
                pairs.append((int(a), int(d)))
            entries[(g, tuple(sorted(pairs)))] = Fraction(valpart)
        if gmax is None:
            gmax = max((g for g, _ in entries), default=0)
            nmax = max((len(p) for _, p in entries), default=0)
            dmax = max((d for _, p in entries for _, d in p), default=0)
        return cls(n, eta, entries, gmax, nmax, dmax)


def _invert_matrix(m):
    n = len(m)
    a = [list(row) + [Fraction(1) if i == j else Fraction(0) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col]), None)
        if piv is None:
            raise TableError("degenerate pairing")
        a[col], a[piv] = a[piv], a[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                c = a[r][col]
                a[r] = [x - c * y for x, y in zip(a[r], a[col])]
    return tuple(tuple(row[n:]) for row in a)


def gen_trivial(gmax, nmax, dmax=None):
    """The dimension-one table generated by the psi recursion.

    Closed under the dimension constraint: every nonzero correlator with at
    most nmax insertions, degrees at most dmax, genus at most gmax.
    """
    if gmax > 3:
        raise BoundsError("generation is supported up to genus 3")
    if dmax is None:
        dmax = 3 * gmax - 3 + nmax
    entries = {}
    for g in range(gmax + 1):
        for n in range(1, nmax + 1):
            if 2 * g - 2 + n <= 0:
                continue
            total = 3 * g - 3 + n
            for part in _partitions(total, n, dmax):
                val = psi_intersection(g, part)
                if val:
                    entries[(g, tuple((1, d) for d in sorted(part)))] = val
    return CorrelatorTable(1, ((Fraction(1),),), entries, gmax, nmax, dmax)


def _partitions(total, n, dmax):
    """Weakly decreasing n-tuples of non-negative integers with the given sum."""

    def rec(total, n, cap):
        if n == 0:
            if total == 0:
                yield ()
            return
        hi = min(total, cap)
        lo = 0
        for first in range(hi, -1, -1):
            if first * n < total:
                break
            for rest in rec(total - first, n - 1, first):
                yield (first,) + rest

    yield from rec(total, n, dmax)


# ---------------------------------------------------------------------------
# conformal data


class ConformalData:
    """Homogeneity data: degree matrix, shift vector, and conformal charge."""

    def __init__(self, q, b, d):
        self.q = tuple(tuple(Fraction(x) for x in row) for row in q)
        self.b = tuple(Fraction(x) for x in b)
        self.d = Fraction(d)
        self.n = len(self.b)

    def validate(self, eta, eta_inv):
        n = self.n
        for a in range(n):
            want = Fraction(1) if a == 0 else Fraction(0)
            if self.q[a][0] != want:
                raise TableError("the unit column of the degree matrix is fixed")
        for a in range(n):
            for b in range(n):
                s = self.q[a][b]
                for mu in range(n):
                    for nu in range(n):
                        s += eta_inv[a][mu] * self.q[nu][mu] * eta[nu][b]
                want = (2 - self.d) if a == b else Fraction(0)
                if s != want:
                    raise TableError(
                        "degree matrix fails the pairing constraint at (%d, %d)" % (a + 1, b + 1)
                    )

    @classmethod
    def trivial(cls):
        return cls(((1,),), (0,), 0)

    @classmethod
    def from_json(cls, obj):
        return cls(obj["q"], obj["b"], obj["d"])

    def to_json(self):
        return {
            "q": [[str(x) for x in row] for row in self.q],
            "b": [str(x) for x in self.b],
            "d": str(self.d),
        }


def tilde_R_M(table: CorrelatorTable, conf: ConformalData):
    """The shifted degree matrix and the shift-coupling matrix.

    Checks the pairing identity R~ eta^-1 + eta^-1 R~^T = eta^-1 used by the
    dispersionless recursion.
    """
    conf.validate(table.eta, table.eta_inv)
    n = table.n
    half = Fraction(1, 2)
    rt = tuple(
        tuple(
            (conf.d - 1) * half * (1 if a == b else 0) + conf.q[a][b]
            for b in range(n)
        )
        for a in range(n)
    )
    m = [[Fraction(0)] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            s = Fraction(0)
            for mu in range(n):
                for ggg in range(n):
                    if conf.b[ggg]:
                        s += table.eta_inv[a][mu] * conf.b[ggg] * table.corr(
                            0, ((mu + 1, 0), (b + 1, 0), (ggg + 1, 0))
                        )
            m[a][b] = s
    # identity used by the recursion proofs
    for a in range(n):
        for c in range(n):
            s = Fraction(0)
            for b in range(n):
                s += rt[a][b] * table.eta_inv[b][c] + rt[c][b] * table.eta_inv[a][b]
            if s != table.eta_inv[a][c]:
                raise TableError("pairing compatibility of the degree matrix failed")
    return rt, tuple(tuple(row) for row in m)


# ---------------------------------------------------------------------------
# residual checks


class Residual:
    """Outcome of one identity check on truncated series."""

    __slots__ = ("name", "params", "series", "certified_order", "within_hypothesis")

    def __init__(self, name, params, series, certified_order, within_hypothesis=True):
        self.name = name
        self.params = params
        self.series = series
        self.certified_order = certified_order
        self.within_hypothesis = within_hypothesis

    @property
    def ok(self):
        return self.series.is_zero_through(self.certified_order)

    def first_violation(self):
        for m in sorted(self.series.monomials_through(self.certified_order)):
            return m, self.series.terms[m]
        return None

    def __repr__(self):
        status = "0" if self.ok else "nonzero"
        return "<%s %s: %s through degree %d>" % (
            self.name,
            self.params,
            status,
            self.certified_order,
        )


def _summed_string_term(F, table):
    n = table.n
    out = TSeries.zero(n)
    for a in range(1, n + 1):
        for p in range(table.dmax):
            d = F.diff(a, p)
            if not d.is_zero:
                out = out + d.mul_var(a, p + 1)
    return out


def check_string(table, Fs=None):
    """Residual of the string identity, one record per genus."""
    out = []
    for g in range(table.gmax + 1):
        F = Fs[g] if Fs else table.genus_potential(g)
        res = F.diff(1, 0) - _summed_string_term(F, table)
        if g == 0:
            quad = TSeries.zero(table.n)
            for a in range(1, table.n + 1):
                for b in range(1, table.n + 1):
                    c = table.eta[a - 1][b - 1]
                    if c:
                        t = TSeries.var(table.n, a, 0).mul_var(b, 0)
                        quad = quad + t.scale(Fraction(c, 2))
            res = res - quad
        if g == 1:
            res = res - TSeries.const(table.n, table.corr(1, ((1, 0),)))
        out.append(Residual("string", {"g": g}, res, table.nmax - 1))
    return out


def check_dilaton(table, Fs=None):
    out = []
    for g in range(table.gmax + 1):
        F = Fs[g] if Fs else table.genus_potential(g)
        res = F.diff(1, 1)
        for a in range(1, table.n + 1):
            for p in range(table.dmax + 1):
                d = F.diff(a, p)
                if not d.is_zero:
                    res = res - d.mul_var(a, p)
        res = res - F.scale(2 * g - 2)
        if g == 1:
            res = res - TSeries.const(table.n, Fraction(table.n, 24))
        out.append(Residual("dilaton", {"g": g}, res, table.nmax - 1))
    return out


def check_wdvv(table, dcap=1, F0=None):
    """Associativity residuals for all index choices with degrees <= dcap."""
    n = table.n
    F0 = F0 if F0 is not None else table.genus_potential(0)
    third = {}

    def d3(a, p, b, q, c, r):
        key = tuple(sorted(((a, p), (b, q), (c, r))))
        if key not in third:
            third[key] = F0.diff(a, p).diff(b, q).diff(c, r)
        return third[key]

    out = []
    idx = [(a, p) for a in range(1, n + 1) for p in range(dcap + 1)]
    for (a1, d1), (a2, d2i) in itertools.combinations_with_replacement(idx, 2):
        for (a3, d3i), (a4, d4) in itertools.combinations_with_replacement(idx, 2):
            lhs = TSeries.zero(n)
            rhs = TSeries.zero(n)
            for al in range(1, n + 1):
                for be in range(1, n + 1):
                    c = table.eta_inv[al - 1][be - 1]
                    if not c:
                        continue
                    lhs = lhs + (
                        d3(a1, d1, a2, d2i, al, 0) * d3(a3, d3i, a4, d4, be, 0)
                    ).scale(c)
                    rhs = rhs + (
                        d3(a2, d2i, a3, d3i, al, 0) * d3(a1, d1, a4, d4, be, 0)
                    ).scale(c)
            out.append(
                Residual(
                    "wdvv",
                    {"i": (a1, d1, a2, d2i, a3, d3i, a4, d4)},
                    lhs - rhs,
                    table.nmax - 3,
                )
            )
    return out


def check_trr0(table, dcap=2, F0=None):
    """Genus-0 topological recursion residuals for first degrees <= dcap."""
    n = table.n
    F0 = F0 if F0 is not None else table.genus_potential(0)
    out = []
    idx = [(a, p) for a in range(1, n + 1) for p in range(dcap + 1)]
    for a1 in range(1, n + 1):
        for d1 in range(dcap + 1):
            for (a2, d2), (a3, d3) in itertools.combinations_with_replacement(idx, 2):
                lhs = F0.diff(a1, d1 + 1).diff(a2, d2).diff(a3, d3)
                rhs = TSeries.zero(n)
                for al in range(1, n + 1):
                    for be in range(1, n + 1):
                        c = table.eta_inv[al - 1][be - 1]
                        if not c:
                            continue
                        rhs = rhs + (
                            F0.diff(a1, d1).diff(al, 0)
                            * F0.diff(be, 0).diff(a2, d2).diff(a3, d3)
                        ).scale(c)
                out.append(
                    Residual(
                        "trr0",
                        {"i": (a1, d1, a2, d2, a3, d3)},
                        lhs - rhs,
                        table.nmax - 3,
                    )
                )
    return out


def apply_euler(f: TSeries, table: CorrelatorTable, conf: ConformalData) -> TSeries:
    """The homogeneity vector field acting on a series."""
    n = table.n
    out = TSeries.zero(n, f.order)
    for a in range(1, n + 1):
        for d in range(table.dmax + 1):
            df = f.diff(a, d)
            if df.is_zero:
                continue
            for mu in range(1, n + 1):
                coef = conf.q[a - 1][mu - 1] - (d if a == mu else 0)
                if coef:
                    out = out + df.mul_var(mu, d).scale(coef)
            if conf.b[a - 1]:
                if d == 0:
                    out = out + df.scale(conf.b[a - 1])
            if d >= 1:
                for mu in range(1, n + 1):
                    s = Fraction(0)
                    for al in range(1, n + 1):
                        for be in range(1, n + 1):
                            if conf.b[be - 1]:
                                s += (
                                    table.eta_inv[mu - 1][al - 1]
                                    * conf.b[be - 1]
                                    * table.corr(0, ((al, 0), (be, 0), (a, 0)))
                                )
                    if s:
                        out = out - f.diff(mu, d - 1).mul_var(a, d).scale(s)
    return out


def check_homogeneity(table, conf, Fs=None):
    """Residual of the conformal identity per genus."""
    conf.validate(table.eta, table.eta_inv)
    out = []
    for g in range(table.gmax + 1):
        F = Fs[g] if Fs else table.genus_potential(g)
        res = apply_euler(F, table, conf) - F.scale((3 - conf.d) * (1 - g))
        if g == 0:
            quad = TSeries.zero(table.n)
            for a in range(1, table.n + 1):
                for b in range(1, table.n + 1):
                    s = Fraction(0)
                    for c in range(1, table.n + 1):
                        if conf.b[c - 1]:
                            s += conf.b[c - 1] * table.corr(0, ((a, 0), (b, 0), (c, 0)))
                    if s:
                        quad = quad + TSeries.var(table.n, a, 0).mul_var(b, 0).scale(
                            Fraction(s, 2)
                        )
            res = res - quad
        if g == 1:
            s = Fraction(0)
            for c in range(1, table.n + 1):
                if conf.b[c - 1]:
                    s += conf.b[c - 1] * table.corr(1, ((c, 0),))
            res = res - TSeries.const(table.n, s)
        out.append(Residual("homogeneity", {"g": g}, res, table.nmax - 1))
    return out


def check_axiom_residuals(table, wdvv_dcap=1, trr_dcap=2):
    """All universal identities; returns the full list of residual records."""
    Fs = [table.genus_potential(g) for g in range(table.gmax + 1)]
    out = []
    out.extend(check_string(table, Fs))
    out.extend(check_dilaton(table, Fs))
    out.extend(check_wdvv(table, wdvv_dcap, Fs[0]))
    out.extend(check_trr0(table, trr_dcap, Fs[0]))
    return out
