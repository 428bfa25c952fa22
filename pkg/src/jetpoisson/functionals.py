"""Local functionals, the graded bracket, and matrix differential operators.

A local functional is a density taken modulo total derivatives and constants.
The canonical representative is computed slice by slice: within each finite
graded slice (dispersion order, standard degree, super degree, factor count)
the image of the total derivative is spanned by derivatives of an enumerable
set of lower-degree monomials, and exact row reduction against that span
yields the reduced form.  Naive integration by parts would loop on Laurent
terms; the linear algebra does not.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .algebra import (
    EVEN,
    MONO_ONE,
    ODD,
    AlgebraError,
    DiffExpr,
    enum_slice_monomials,
    mono_count,
    mono_maxjet,
    mono_std,
    mono_sup,
    mono_u11,
    _pivot_key,
)


def _pivot_rows(alg, d, p, m, maxjet, min_e11):
    """Fully reduced rows spanning the total-derivative image in a slice.

    Returns a list of (pivot monomial, row) with unit pivot coefficient and
    no other pivot monomial occurring in any row.
    """
    key = (d, p, m, maxjet, min_e11)
    cached = alg._slice_cache.get(key)
    if cached is not None:
        return cached

    pivots = {}  # pivot monomial -> row dict
    order = []  # pivot monomials, insertion order
    for pre in enum_slice_monomials(alg, d - 1, p, m, maxjet - 1, min_e11):
        row = {}
        for c, dm in alg.mono_dx(pre):
            nc = row.get(dm, 0) + c
            if nc:
                row[dm] = nc
            else:
                del row[dm]
        # reduce against existing pivots
        for pm in list(row):
            prow = pivots.get(pm)
            if prow is not None:
                c = row.pop(pm)
                for mm, cc in prow.items():
                    if mm == pm:
                        continue
                    nc = row.get(mm, 0) - c * cc
                    if nc:
                        row[mm] = nc
                    else:
                        del row[mm]
        if not row:
            continue
        pm = max(row, key=_pivot_key)
        inv = Fraction(1) / row[pm]
        row = {mm: cc * inv for mm, cc in row.items()}
        # eliminate the new pivot from older rows
        for opm in order:
            orow = pivots[opm]
            if pm in orow:
                c = orow.pop(pm)
                for mm, cc in row.items():
                    if mm == pm:
                        continue
                    nc = orow.get(mm, 0) - c * cc
                    if nc:
                        orow[mm] = nc
                    else:
                        del orow[mm]
        pivots[pm] = row
        order.append(pm)

    rows = [(pm, pivots[pm]) for pm in order]
    alg._slice_cache[key] = rows
    return rows


def _reduce_slice(alg, d, p, m, tdict):
    if (d, p, m) == (0, 0, 0):
        # constants are dropped, but the slice also carries Laurent-balanced
        # monomials which must be reduced like everything else
        tdict = {mono: c for mono, c in tdict.items() if mono != MONO_ONE}
        if not tdict:
            return {}
    maxjet = 0
    min_e11 = 0
    for mono in tdict:
        mj = mono_maxjet(mono)
        if mj > maxjet:
            maxjet = mj
        u = mono_u11(mono)
        if u < min_e11:
            min_e11 = u
    floor_pre = min_e11 + 1 if min_e11 < 0 else 0
    rows = _pivot_rows(alg, d, p, m, maxjet, floor_pre)
    v = dict(tdict)
    for pm, row in rows:
        c = v.get(pm)
        if not c:
            continue
        for mm, cc in row.items():
            nc = v.get(mm, 0) - c * cc
            if nc:
                v[mm] = nc
            else:
                del v[mm]
    return v


def normalize(f: DiffExpr) -> DiffExpr:
    """Canonical representative of f modulo total derivatives and constants."""
    alg = f.alg
    out = {}
    for g, terms in f.parts.items():
        slices = {}
        for mono, c in terms.items():
            key = (mono_std(mono), mono_sup(mono), mono_count(mono))
            slices.setdefault(key, {})[mono] = c
        dst = {}
        for (d, p, m), tdict in slices.items():
            for mono, c in _reduce_slice(alg, d, p, m, tdict).items():
                dst[mono] = c
        if dst:
            out[g] = dst
    return DiffExpr(alg, out)


class LocalFunctional:
    """Equivalence class of a density modulo total derivatives and constants."""

    __slots__ = ("alg", "rep")

    def __init__(self, alg, rep):
        self.alg = alg
        self.rep = rep

    @property
    def is_zero(self):
        return self.rep.is_zero

    def sup_degree(self):
        sups = {mono_sup(m) for t in self.rep.parts.values() for m in t}
        if len(sups) > 1:
            raise AlgebraError("functional is inhomogeneous in the super degree")
        return sups.pop() if sups else 0

    def grade(self):
        return self.rep.grade()

    def __add__(self, other):
        if isinstance(other, LocalFunctional):
            other = other.rep
        return integrate(self.rep + other)

    def __sub__(self, other):
        if isinstance(other, LocalFunctional):
            other = other.rep
        return integrate(self.rep - other)

    def __neg__(self):
        return LocalFunctional(self.alg, -self.rep)

    def scale(self, c):
        return LocalFunctional(self.alg, self.rep.scale(c))

    def __eq__(self, other):
        if not isinstance(other, LocalFunctional):
            return NotImplemented
        if self.rep == other.rep:
            return True
        return normalize(self.rep - other.rep).is_zero

    def __hash__(self):
        return hash(self.rep)

    def __str__(self):
        return "int( %s )dx" % self.rep

    __repr__ = __str__


def integrate(f: DiffExpr) -> LocalFunctional:
    return LocalFunctional(f.alg, normalize(f))


def schouten(P, Q) -> LocalFunctional:
    """Graded bracket of two local functionals (homogeneous super degree)."""
    if isinstance(P, DiffExpr):
        P = integrate(P)
    if isinstance(Q, DiffExpr):
        Q = integrate(Q)
    p = P.sup_degree()
    Q.sup_degree()
    alg = P.alg
    n = alg.n
    density = alg.zero()
    fp, fq = P.rep, Q.rep
    for a in range(1, n + 1):
        dp_th = fp.var_deriv(a, ODD)
        dq_u = fq.var_deriv(a, EVEN)
        if not dp_th.is_zero and not dq_u.is_zero:
            density = density + dp_th * dq_u
        dp_u = fp.var_deriv(a, EVEN)
        dq_th = fq.var_deriv(a, ODD)
        if not dp_u.is_zero and not dq_th.is_zero:
            term = dp_u * dq_th
            density = density + term if p % 2 == 0 else density - term
    return integrate(density)


# ---------------------------------------------------------------------------
# matrix differential operators


def matrix_zero(alg, n):
    z = alg.zero()
    return tuple(tuple(z for _ in range(n)) for _ in range(n))


def _mat_add(a, b):
    return tuple(
        tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b)
    )


class DiffOperator:
    """Matrix-valued differential operator graded by even dispersion orders.

    ``coeffs`` maps (g, s) to an NxN matrix of coefficient expressions; the
    operator is sum over (g, s) of eps^(2g) * coeff * Dx^s.  Coefficient
    entries carry no dispersion grading of their own.
    """

    __slots__ = ("alg", "coeffs")

    def __init__(self, alg, coeffs):
        self.alg = alg
        self.coeffs = coeffs

    @classmethod
    def build(cls, alg, coeffs):
        clean = {}
        for (g, s), mat in coeffs.items():
            if g > alg.gmax:
                continue
            if any(not e.is_zero for row in mat for e in row):
                clean[(g, s)] = mat
        return cls(alg, clean)

    @classmethod
    def eta_dx(cls, alg, eta_inv_matrix):
        """Hydrodynamic operator with constant coefficients: eta * Dx."""
        n = alg.n
        mat = tuple(
            tuple(alg.const(eta_inv_matrix[a][b]) for b in range(n))
            for a in range(n)
        )
        return cls.build(alg, {(0, 1): mat})

    @property
    def is_zero(self):
        return not self.coeffs

    def entry(self, g, s, a, b):
        mat = self.coeffs.get((g, s))
        if mat is None:
            return self.alg.zero()
        return mat[a][b]

    def orders(self):
        return sorted(self.coeffs)

    def smax(self, g):
        return max((s for (gg, s) in self.coeffs if gg == g), default=-1)

    def eps_truncate(self, gmax):
        return DiffOperator.build(
            self.alg, {k: m for k, m in self.coeffs.items() if k[0] <= gmax}
        )

    def __add__(self, other):
        coeffs = dict(self.coeffs)
        for k, mat in other.coeffs.items():
            coeffs[k] = _mat_add(coeffs[k], mat) if k in coeffs else mat
        return DiffOperator.build(self.alg, coeffs)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, c):
        return DiffOperator.build(
            self.alg,
            {
                k: tuple(tuple(e.scale(c) for e in row) for row in mat)
                for k, mat in self.coeffs.items()
            },
        )

    def map_entries(self, fn):
        return DiffOperator.build(
            self.alg,
            {
                k: tuple(tuple(fn(e) for e in row) for row in mat)
                for k, mat in self.coeffs.items()
            },
        )

    def compose(self, other):
        """Operator composition with the Leibniz expansion of Dx powers."""
        alg = self.alg
        n = alg.n
        gmax = alg.gmax
        out = {}
        for (g1, s1), m1 in self.coeffs.items():
            for (g2, s2), m2 in other.coeffs.items():
                g = g1 + g2
                if g > gmax:
                    continue
                # cache Dx^k of m2 entries as we go
                dxk = [m2]
                for k in range(s1 + 1):
                    if k > 0:
                        dxk.append(
                            tuple(tuple(e.dx() for e in row) for row in dxk[-1])
                        )
                    c = comb(s1, k)
                    s = s1 + s2 - k
                    mat = out.get((g, s))
                    if mat is None:
                        mat = [[alg.zero()] * n for _ in range(n)]
                        out[(g, s)] = mat
                    mk = dxk[k]
                    for a in range(n):
                        row1 = m1[a]
                        outa = mat[a]
                        for b in range(n):
                            acc = outa[b]
                            for mu in range(n):
                                e1 = row1[mu]
                                if e1.is_zero:
                                    continue
                                e2 = mk[mu][b]
                                if e2.is_zero:
                                    continue
                                term = e1 * e2
                                acc = acc + term.scale(c) if c != 1 else acc + term
                            outa[b] = acc
        return DiffOperator.build(
            self.alg,
            {k: tuple(tuple(r) for r in m) for k, m in out.items()},
        )

    def apply(self, covector):
        """Apply to a list of densities indexed by the second slot."""
        alg = self.alg
        n = alg.n
        out = [alg.zero() for _ in range(n)]
        dx_cache = {}
        for (g, s), mat in self.coeffs.items():
            for b in range(n):
                key = (b, s)
                if key not in dx_cache:
                    dx_cache[key] = covector[b].dx(s)
                xb = dx_cache[key]
                if xb.is_zero:
                    continue
                for a in range(n):
                    e = mat[a][b]
                    if not e.is_zero:
                        out[a] = out[a] + (e * xb).shift_eps(g)
        return out

    def formal_adjoint_neg(self):
        """The operator sum (-1)^(s+1) Dx^s o (transposed coefficients)."""
        alg = self.alg
        n = alg.n
        out = {}
        for (g, s), mat in self.coeffs.items():
            sign0 = 1 if (s + 1) % 2 == 0 else -1
            for k in range(s + 1):
                c = Fraction(comb(s, k) * sign0)
                key = (g, s - k)
                dst = out.setdefault(key, [[alg.zero()] * n for _ in range(n)])
                for a in range(n):
                    for b in range(n):
                        e = mat[b][a]
                        if e.is_zero:
                            continue
                        dst[a][b] = dst[a][b] + e.dx(k).scale(c)
        return DiffOperator.build(
            alg, {k: tuple(tuple(r) for r in m) for k, m in out.items()}
        )

    def skew_defect(self):
        """Zero iff the coefficients satisfy the skew normalization."""
        return self - self.formal_adjoint_neg()

    def is_skew(self):
        return self.skew_defect().is_zero

    def to_bivector(self) -> LocalFunctional:
        alg = self.alg
        density = alg.zero()
        half = Fraction(1, 2)
        for (g, s), mat in self.coeffs.items():
            for a in range(alg.n):
                for b in range(alg.n):
                    e = mat[a][b]
                    if e.is_zero:
                        continue
                    term = e * alg.th(a + 1, 0) * alg.th(b + 1, s)
                    density = density + term.scale(half).shift_eps(g)
        return integrate(density)

    def __str__(self):
        alg = self.alg
        lines = []
        for a in range(alg.n):
            for b in range(alg.n):
                chunks = []
                for (g, s) in sorted(self.coeffs, key=lambda k: (k[0], -k[1])):
                    e = self.coeffs[(g, s)][a][b]
                    if e.is_zero:
                        continue
                    body = str(e)
                    if " + " in body or " - " in body:
                        body = "(%s)" % body
                    if g:
                        body = "eps^%d*%s" % (2 * g, body)
                    if s:
                        dx = "Dx" if s == 1 else "Dx^%d" % s
                        body = dx if body == "1" else "%s*%s" % (body, dx)
                    chunks.append(body)
                entry = " + ".join(chunks) if chunks else "0"
                if alg.n == 1:
                    lines.append(entry)
                else:
                    lines.append("[%d,%d] %s" % (a + 1, b + 1, entry))
        return "\n".join(lines)

    __repr__ = __str__


def operator_to_bivector(P: DiffOperator) -> LocalFunctional:
    return P.to_bivector()


def bivector_to_operator(F: LocalFunctional) -> DiffOperator:
    """Extract the normalized operator coefficients from a bivector class."""
    if F.sup_degree() != 2:
        raise AlgebraError("bivector extraction needs super degree 2")
    alg = F.alg
    n = alg.n
    coeffs = {}
    for a in range(1, n + 1):
        x = F.rep.var_deriv(a, ODD)
        for g, terms in x.parts.items():
            for (even, odd), c in terms.items():
                if len(odd) != 1:
                    raise AlgebraError("unexpected monomial in bivector extraction")
                b, s = odd[0]
                key = (g, s)
                mat = coeffs.setdefault(key, [[alg.zero()] * n for _ in range(n)])
                mat[a - 1][b - 1] = mat[a - 1][b - 1] + alg.monomial((even, ()), c)
    op = DiffOperator.build(
        alg, {k: tuple(tuple(r) for r in m) for k, m in coeffs.items()}
    )
    defect = op.skew_defect()
    if not defect.is_zero:
        raise AlgebraError("extracted operator violates the skew normalization")
    return op


def poisson_residual(P: DiffOperator) -> LocalFunctional:
    """The bracket of the operator with itself; zero iff Poisson to truncation."""
    B = P.to_bivector()
    return schouten(B, B)


def compatibility_residual(P: DiffOperator, K: DiffOperator) -> LocalFunctional:
    B1 = P.to_bivector()
    B2 = K.to_bivector()
    return schouten(B1, B2)
