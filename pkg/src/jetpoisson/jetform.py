"""Bridge between time series and jet-coordinate expressions.

From a correlator table this module assembles the genus potentials, the
two-point functions, the dispersionless coordinates v(t) and their jets, and
reconstructs jet-coordinate expressions from truncated series by an exact
overdetermined linear solve with a surplus-residual certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .algebra import DiffExpr, JetAlgebra, U11
from .cohft import BoundsError, CorrelatorTable, ConformalData, Residual, apply_euler, tilde_R_M
from .tseries import TSeries


class JetifyError(ValueError):
    def __init__(self, kind, detail):
        super().__init__("%s: %s" % (kind, detail))
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class JetBounds:
    """Ansatz bounds for series-to-jet reconstruction."""

    max_jet: int
    laurent_min: int = 0
    coeff_degree: int = 0
    surplus: Fraction = Fraction(1, 4)


@dataclass
class JetifyCertificate:
    unknowns: int
    equations: int
    rank: int
    surplus: int
    residual_ok: bool
    order: int
    capped: int = 0

    def as_dict(self):
        return {
            "unknowns": self.unknowns,
            "equations": self.equations,
            "rank": self.rank,
            "surplus": self.surplus,
            "residual_ok": self.residual_ok,
            "order": self.order,
            "capped": self.capped,
        }


class SeriesData:
    """Memoized series built from one table: potentials, two-point functions,
    dispersionless coordinates and their jets."""

    def __init__(self, table: CorrelatorTable):
        self.table = table
        self.n = table.n
        self._F = {}
        self._omega = {}
        self._v = {}
        self._vjet = {}
        self._pow = {}
        self._v11_inv = None

    def F(self, g):
        if g not in self._F:
            self._F[g] = self.table.genus_potential(g)
        return self._F[g]

    def omega(self, g, a, p, b, q):
        """Second derivative of the genus potential; the (p or q) = -1 slots
        follow the pairing convention."""
        if p == -1:
            return TSeries.const(
                self.n, self.table.eta[a - 1][b - 1] if g == 0 else 0
            )
        if q == -1:
            return TSeries.const(
                self.n, self.table.eta[a - 1][b - 1] if g == 0 else 0
            )
        key = (g, a, p, b, q)
        got = self._omega.get(key)
        if got is None:
            if max(p, q) > self.table.dmax:
                raise BoundsError(
                    "two-point function needs degree %d beyond table bound %d"
                    % (max(p, q), self.table.dmax)
                )
            got = self.F(g).diff(a, p).diff(b, q)
            self._omega[key] = got
        return got

    def v(self, a):
        got = self._v.get(a)
        if got is None:
            got = TSeries.zero(self.n)
            for b in range(1, self.n + 1):
                c = self.table.eta_inv[a - 1][b - 1]
                if c:
                    got = got + self.omega(0, b, 0, 1, 0).scale(c)
            self._v[a] = got
        return got

    def v_jet(self, a, k):
        key = (a, k)
        got = self._vjet.get(key)
        if got is None:
            got = self.v(a) if k == 0 else self.v_jet(a, k - 1).dx()
            self._vjet[key] = got
        return got

    def v11_inv(self):
        if self._v11_inv is None:
            self._v11_inv = self.v_jet(1, 1).inverse()
        return self._v11_inv

    def _power(self, a, s, e):
        key = (a, s, e)
        got = self._pow.get(key)
        if got is None:
            if e >= 0:
                got = self.v_jet(a, s) ** e
            else:
                got = self.v11_inv() ** (-e)
            self._pow[key] = got
        return got

    def jet_monomial(self, mono):
        """Evaluate an even jet monomial on the dispersionless solution."""
        even, odd = mono
        if odd:
            raise ValueError("only even monomials evaluate on the solution")
        out = TSeries.const(self.n, 1)
        for (a, s), e in even:
            out = out * self._power(a, s, e)
        return out

    def jet_expr_series(self, expr: DiffExpr):
        """Evaluate a jet expression per dispersion order; returns {g: series}."""
        out = {}
        for g, terms in expr.parts.items():
            acc = TSeries.zero(self.n)
            for mono, c in terms.items():
                acc = acc + self.jet_monomial(mono).scale(c)
            out[g] = acc
        return out

    def w_part(self, g, a):
        """Correction of order 2g in the fast coordinates: eta * two-point."""
        if g == 0:
            return self.v(a)
        out = TSeries.zero(self.n)
        for b in range(1, self.n + 1):
            c = self.table.eta_inv[a - 1][b - 1]
            if c:
                out = out + self.omega(g, b, 0, 1, 0).scale(c)
        return out


def enum_jet_monomials(n, degree, bounds: JetBounds):
    """Even monomials of the given standard degree within the ansatz bounds.

    The exponent of u[1,1] is pinned by homogeneity once the other jet
    factors are chosen; undifferentiated variables are bounded separately.
    """
    jet_vars = [
        (a, s)
        for s in range(1, bounds.max_jet + 1)
        for a in range(1, n + 1)
        if (a, s) != U11
    ]
    jet_vars.sort(key=lambda v: -v[1])
    u0_vars = [(a, 0) for a in range(1, n + 1)]

    u0_parts = []

    def rec_u0(i, left, acc):
        if i == len(u0_vars):
            u0_parts.append(tuple(acc))
            return
        for e in range(left + 1):
            rec_u0(i + 1, left - e, acc + ([(u0_vars[i], e)] if e else []))

    rec_u0(0, bounds.coeff_degree, [])

    wmax = degree - bounds.laurent_min
    jet_parts = []

    def rec_jet(i, wleft, acc):
        if i == len(jet_vars):
            jet_parts.append(tuple(acc))
            return
        a, s = jet_vars[i]
        for e in range(wleft // s + 1):
            rec_jet(i + 1, wleft - e * s, acc + ([((a, s), e)] if e else []))

    rec_jet(0, max(wmax, 0), [])

    out = []
    for jp in jet_parts:
        w = sum(s * e for (_, s), e in jp)
        e11 = degree - w
        if e11 < bounds.laurent_min:
            continue
        base = tuple(sorted(jp + (((U11, e11),) if e11 else ())))
        for up in u0_parts:
            mono = (tuple(sorted(base + up)), ())
            out.append(mono)
    return out


def solve_linear(columns, rhs_terms, monomials):
    """Exact solve of sum_i x_i * columns[i] = rhs over the listed monomials.

    columns are dicts monomial -> coefficient.  Returns (solution list, rank,
    residual_ok) or raises on underdetermined systems; inconsistency shows up
    as residual_ok = False.
    """
    nunk = len(columns)
    pivots = {}  # unknown index -> (row dict, rhs)
    pivot_order = []
    for m in monomials:
        row = {}
        for i, col in enumerate(columns):
            c = col.get(m)
            if c:
                row[i] = c
        b = rhs_terms.get(m, Fraction(0))
        # reduce against existing pivots
        for i in list(row):
            pv = pivots.get(i)
            if pv is not None and i == pv[2]:
                c = row.pop(i)
                prow, pb, _ = pv
                for j, cc in prow.items():
                    if j == i:
                        continue
                    nc = row.get(j, 0) - c * cc
                    if nc:
                        row[j] = nc
                    else:
                        row.pop(j, None)
                b -= c * pb
        if row:
            piv = min(row)
            inv = Fraction(1) / row.pop(piv)
            row = {j: c * inv for j, c in row.items()}
            b *= inv
            # eliminate from older pivots
            for i in pivot_order:
                prow, pb, _ = pivots[i]
                if piv in prow:
                    c = prow.pop(piv)
                    for j, cc in row.items():
                        nc = prow.get(j, 0) - c * cc
                        if nc:
                            prow[j] = nc
                        else:
                            prow.pop(j, None)
                    pivots[i] = (prow, pb - c * b, i)
            pivots[piv] = (row, b, piv)
            pivot_order.append(piv)
    rank = len(pivot_order)
    if rank < nunk:
        raise JetifyError("underdetermined", "nullity %d" % (nunk - rank))
    x = [Fraction(0)] * nunk
    for i in pivot_order:
        row, b, _ = pivots[i]
        if row:
            raise JetifyError("underdetermined", "pivot row not fully reduced")
        x[i] = b
    # verify every equation including the surplus ones
    ok = True
    for m in monomials:
        s = Fraction(0)
        for i, col in enumerate(columns):
            c = col.get(m)
            if c:
                s += c * x[i]
        if s != rhs_terms.get(m, Fraction(0)):
            ok = False
            break
    return x, rank, ok


def jetify(
    sd: SeriesData,
    f: TSeries,
    degree: int,
    bounds: JetBounds,
    alg: JetAlgebra,
):
    """Reconstruct the jet expression with the given homogeneous degree whose
    evaluation on the dispersionless solution reproduces the series.

    The system is required to be overdetermined by the configured surplus and
    every surplus equation must hold exactly; the certificate records it.
    """
    monos = enum_jet_monomials(sd.n, degree, bounds)
    if not monos:
        if f.is_zero:
            return alg.zero(), JetifyCertificate(0, 0, 0, 0, True, f.order)
        raise JetifyError("inconsistent", "empty ansatz for a nonzero series")
    # the usable order is known before any product is taken
    ord_eq = f.order
    for m in monos:
        for (a, s), e in m[0]:
            o = sd.v_jet(a, s).order if e > 0 else sd.v11_inv().order
            if o < ord_eq:
                ord_eq = o
    # a monomial whose evaluation starts beyond the usable order is invisible
    # to every equation; keeping it would only manufacture null directions.
    # The certificate records how many were excluded: a nonzero count means
    # the reconstruction window was capped by the series order.
    visible = []
    capped = 0
    for m in monos:
        start = sum(e for _, e in m[0] if e > 0)
        if start <= ord_eq:
            visible.append(m)
        else:
            capped += 1
    monos = visible
    if not monos:
        if f.is_zero:
            return alg.zero(), JetifyCertificate(0, 0, 0, 0, True, ord_eq, capped)
        raise JetifyError("underdetermined", "all ansatz monomials invisible")
    columns = []
    pow_cache = {}
    for m in monos:
        acc = TSeries.const(sd.n, 1, ord_eq)
        for (a, s), e in m[0]:
            key = (a, s, e)
            got = pow_cache.get(key)
            if got is None:
                if e >= 0:
                    base = sd.v_jet(a, s).truncate(ord_eq)
                    got = base ** e
                else:
                    base = sd.v11_inv().truncate(ord_eq)
                    got = base ** (-e)
                pow_cache[key] = got
            acc = acc * got
        columns.append(acc)
    support = set()
    for s in columns:
        support.update(s.monomials_through(ord_eq))
    support.update(f.monomials_through(ord_eq))
    eq_monos = sorted(m for m in support)
    cols = [
        {m: c for m, c in s.terms.items() if sum(e for _, e in m) <= ord_eq}
        for s in columns
    ]
    rhs = {m: c for m, c in f.terms.items() if sum(e for _, e in m) <= ord_eq}
    nunk = len(monos)
    neq = len(eq_monos)
    need = nunk + max(1, int(nunk * bounds.surplus))
    if neq < need:
        raise JetifyError(
            "underdetermined",
            "have %d equations for %d unknowns, need %d" % (neq, nunk, need),
        )
    x, rank, ok = solve_linear(cols, rhs, eq_monos)
    if not ok:
        raise JetifyError("inconsistent", "surplus equations violated")
    expr = alg.zero()
    for xi, m in zip(x, monos):
        if xi:
            expr = expr + alg.monomial(m, xi)
    cert = JetifyCertificate(nunk, neq, rank, neq - rank, ok, ord_eq, capped)
    return expr, cert


def default_bounds(g, coeff_degree=0, extra_jet=0, extra_depth=0):
    """Ansatz bounds adequate for two-point functions at the given genus.

    The Laurent floor tracks the observed singularity depth of the
    quasi-triviality corrections (one below 3g); widening it costs series
    order because deeper windows admit longer jet products.
    """
    if g == 0:
        return JetBounds(max_jet=0, laurent_min=0, coeff_degree=coeff_degree)
    return JetBounds(
        max_jet=3 * g + extra_jet,
        laurent_min=-(3 * g + 1 + extra_depth),
        coeff_degree=coeff_degree,
    )


class JetData:
    """Jet forms of the two-point functions, memoized, with certificates."""

    def __init__(
        self,
        sd: SeriesData,
        alg: JetAlgebra,
        coeff_degree=None,
        higher_coeff_degree=None,
        extra_depth=0,
    ):
        self.sd = sd
        self.alg = alg
        # enough undifferentiated powers for the dispersionless two-point
        # functions within the table's degree bounds
        self.coeff_degree = (
            coeff_degree if coeff_degree is not None else 2 * sd.table.dmax + 3
        )
        self.higher_coeff_degree = higher_coeff_degree
        self.extra_depth = extra_depth
        self._omega_jet = {}
        self.certificates = {}

    def omega_jet(self, g, a, p, b, q):
        key = (g, a, p, b, q)
        got = self._omega_jet.get(key)
        if got is None:
            series = self.sd.omega(g, a, p, b, q)
            if g == 0:
                # an undifferentiated power beyond the certified series order
                # cannot be pinned by any equation, so the window is capped
                bounds = JetBounds(0, 0, min(self.coeff_degree, series.order))
            else:
                cd = self.higher_coeff_degree
                if cd is None:
                    # window suggested by the homogeneity weight count;
                    # too small fails the surplus residual, too large the
                    # rank check, so a bad guess is never silent
                    cd = max(0, p + q + 2 * g + 2)
                cd = min(cd, max(0, series.order - 3 * g - 1))
                bounds = default_bounds(g, cd, extra_depth=self.extra_depth)
            got, cert = jetify(self.sd, series, 2 * g, bounds, self.alg)
            self._omega_jet[key] = got
            self.certificates[key] = cert
        return got

    def quasi_miura(self, gmax):
        """The coordinate change from slow to fast variables as a transform."""
        from .transform import MiuraTransform

        parts = {}
        for g in range(1, gmax + 1):
            vec = []
            for a in range(1, self.sd.n + 1):
                acc = self.alg.zero()
                for b in range(1, self.sd.n + 1):
                    c = self.sd.table.eta_inv[a - 1][b - 1]
                    if c:
                        acc = acc + self.omega_jet(g, b, 0, 1, 0).scale(c)
                vec.append(acc)
            parts[g] = tuple(vec)
        return MiuraTransform(self.alg, parts)


def check_euler_on_omega(sd, conf: ConformalData, g, a, b, p):
    """Residual of the homogeneity action on a two-point function."""
    table = sd.table
    rt, m = tilde_R_M(table, conf)
    n = table.n
    res = apply_euler(sd.omega(g, a, 0, b, p), table, conf)
    res = res + sd.omega(g, a, 0, b, p).scale(g * (3 - conf.d) - 1)
    for c in range(1, n + 1):
        if rt[c - 1][a - 1]:
            res = res + sd.omega(g, c, 0, b, p).scale(rt[c - 1][a - 1])
        coef = (p + 1 if c == b else 0) - rt[c - 1][b - 1]
        if coef:
            res = res - sd.omega(g, a, 0, c, p).scale(coef)
        if m[c - 1][b - 1]:
            res = res - sd.omega(g, a, 0, c, p - 1).scale(m[c - 1][b - 1])
    return Residual(
        "euler-two-point", {"g": g, "a": a, "b": b, "p": p}, res, res.order
    )
