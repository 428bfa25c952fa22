"""Near-identity changes of jet coordinates and their action on everything.

A transform sends u^a to u^a plus corrections in even dispersion orders; the
polynomial flavor has differential-polynomial corrections of matching degree,
the rational flavor allows the Laurent structure in u[1,1].  Composition and
inversion work order by order in the dispersion parameter, which is finite by
truncation; no series reversion in the jet variables ever happens.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .algebra import AlgebraError, DiffExpr, mono_std
from .functionals import DiffOperator


class MiuraTransform:
    """u^a -> u^a + sum_k eps^(2k) F_k^a with F_k^a free of odd variables."""

    __slots__ = ("alg", "parts", "_cache")

    def __init__(self, alg, parts):
        # parts: dict k>=1 -> tuple of N expressions (dispersion order 0 each)
        self.alg = alg
        self.parts = {
            k: tuple(v) for k, v in parts.items() if k >= 1 and any(
                not e.is_zero for e in v
            )
        }
        for k, vec in self.parts.items():
            for e in vec:
                if e.eps_orders() not in ([], [0]):
                    raise AlgebraError("correction terms carry their own order")
                if any(m[1] for t in e.parts.values() for m in t):
                    raise AlgebraError("transform corrections must be even")
        # prolongations and substituted powers are pure functions of the
        # transform; the memo is shared across substitutions
        self._cache = {}

    @classmethod
    def identity(cls, alg):
        return cls(alg, {})

    @property
    def is_identity(self):
        return not self.parts

    @property
    def rational(self):
        return any(e.min_u11() < 0 for vec in self.parts.values() for e in vec)

    def component(self, alpha):
        """Full image of u^alpha as a dispersion-graded expression."""
        alg = self.alg
        out = alg.u(alpha, 0)
        for k, vec in self.parts.items():
            if k <= alg.gmax:
                out = out + vec[alpha - 1].shift_eps(k)
        return out

    def degree_check(self):
        """True when each order-2k correction is homogeneous of degree 2k."""
        for k, vec in self.parts.items():
            for e in vec:
                for terms in e.parts.values():
                    for m in terms:
                        if mono_std(m) != 2 * k:
                            return False
        return True

    def __str__(self):
        alg = self.alg
        lines = []
        for a in range(1, alg.n + 1):
            lines.append("u[%d] -> %s" % (a, self.component(a)))
        return "\n".join(lines)

    __repr__ = __str__


def _prolong(T: MiuraTransform, alpha, s):
    """dx^s of the image of u^alpha."""
    key = ("prolong", alpha, s)
    got = T._cache.get(key)
    if got is None:
        if s == 0:
            got = T.component(alpha)
        else:
            got = _prolong(T, alpha, s - 1).dx()
        T._cache[key] = got
    return got


def _neg_power(base_plus, e, alg):
    """(u[1,1] + X)^e for e < 0, X carrying positive dispersion orders."""
    u11 = alg.u(1, 1)
    x = base_plus - u11
    out = alg.u(1, 1, e)
    if x.is_zero:
        return out
    acc = out
    xj = alg.one()
    for j in range(1, alg.gmax + 1):
        xj = xj * x * alg.u(1, 1, -1)
        if xj.is_zero:
            break
        c = Fraction(_falling(e, j), _factorial(j))
        acc = acc + (alg.u(1, 1, e) * xj).scale(c)
    return acc


def _falling(e, j):
    out = 1
    for i in range(j):
        out *= e - i
    return out


def _factorial(j):
    out = 1
    for i in range(2, j + 1):
        out *= i
    return out


def substitute(f: DiffExpr, T: MiuraTransform) -> DiffExpr:
    """Replace every even jet by the prolonged transform image.

    Odd variables pass through unchanged.  Negative powers of u[1,1] expand
    by the binomial series in the dispersion-graded correction, finite at the
    truncation.
    """
    if T.is_identity:
        return f
    alg = f.alg
    out = alg.zero()
    for g, terms in f.parts.items():
        for (even, odd), c in terms.items():
            acc = alg.monomial(((), odd), c, g)
            for (a, s), e in even:
                key = ("pow", a, s, e)
                val = T._cache.get(key)
                if val is None:
                    base = _prolong(T, a, s)
                    if e >= 0:
                        val = base ** e
                    else:
                        val = _neg_power(base, e, alg)
                    T._cache[key] = val
                acc = acc * val
                if acc.is_zero:
                    break
            out = out + acc
    return out


def push_theta(T: MiuraTransform):
    """Expressions of the old odd coordinates through the new ones.

    Returns the list Theta_b = sum_s (-dx)^s( (d image^a / d u^b_s) th_a ),
    linear in the odd variables, one entry per b.
    """
    alg = T.alg
    n = alg.n
    out = []
    for b in range(1, n + 1):
        theta = alg.th(b, 0)
        for k, vec in T.parts.items():
            if k > alg.gmax:
                continue
            for a in range(1, n + 1):
                fa = vec[a - 1]
                maxjet = fa.max_jet()
                for s in range(maxjet + 1):
                    dfa = fa.partial(b, s)
                    if dfa.is_zero:
                        continue
                    term = (dfa * alg.th(a, 0)).dx(s)
                    term = term.shift_eps(k)
                    theta = theta + term if s % 2 == 0 else theta - term
        out.append(theta)
    return out


def pushforward(f: DiffExpr, T: MiuraTransform, T_inv: MiuraTransform = None) -> DiffExpr:
    """Express a density in the transformed coordinate system.

    Replaces odd variables through the induced rule, then even variables
    through the inverse transform, so the result reads in the new alphabet.
    """
    alg = f.alg
    if T_inv is None:
        T_inv = invert(T)
    thetas = push_theta(T)
    theta_jets = {}

    def theta_jet(b, s):
        key = (b, s)
        got = theta_jets.get(key)
        if got is None:
            got = thetas[b - 1] if s == 0 else theta_jet(b, s - 1).dx()
            theta_jets[key] = got
        return got

    mixed = alg.zero()
    for g, terms in f.parts.items():
        for (even, odd), c in terms.items():
            acc = alg.monomial((even, ()), c, g)
            for (b, s) in odd:
                acc = acc * theta_jet(b, s)
                if acc.is_zero:
                    break
            mixed = mixed + acc
    return substitute(mixed, T_inv)


def invert(T: MiuraTransform) -> MiuraTransform:
    """Inverse transform to the dispersion truncation, order by order."""
    alg = T.alg
    if T.is_identity:
        return T
    inv = MiuraTransform.identity(alg)
    for _ in range(alg.gmax):
        parts = {}
        for a in range(1, alg.n + 1):
            corr = alg.zero()
            for k, vec in T.parts.items():
                if k <= alg.gmax:
                    corr = corr + vec[a - 1].shift_eps(k)
            img = substitute(corr, inv)
            for g in img.eps_orders():
                piece = img.eps_piece(g).drop_eps().scale(-1)
                vecs = parts.setdefault(g, [alg.zero()] * alg.n)
                vecs[a - 1] = vecs[a - 1] + piece
        inv = MiuraTransform(alg, {k: tuple(v) for k, v in parts.items()})
    return inv


def compose(T2: MiuraTransform, T1: MiuraTransform) -> MiuraTransform:
    """The transform sending u to T2(T1(u))."""
    alg = T2.alg
    parts = {}
    for a in range(1, alg.n + 1):
        img = substitute(T2.component(a), T1)
        for g in img.eps_orders():
            if g == 0:
                if img.eps_piece(0).drop_eps() != alg.u(a, 0):
                    raise AlgebraError("composition lost the identity leading term")
                continue
            vecs = parts.setdefault(g, [alg.zero()] * alg.n)
            vecs[a - 1] = img.eps_piece(g).drop_eps()
    return MiuraTransform(alg, {k: tuple(v) for k, v in parts.items()})


def _jacobian_operator(T: MiuraTransform):
    """L with entries sum_e (d image^a / d u^m_e) Dx^e."""
    alg = T.alg
    n = alg.n
    coeffs = {}
    ident = tuple(
        tuple(alg.one() if a == b else alg.zero() for b in range(n))
        for a in range(n)
    )
    coeffs[(0, 0)] = ident
    for k, vec in T.parts.items():
        if k > alg.gmax:
            continue
        maxjet = max((e.max_jet() for e in vec), default=0)
        for e in range(maxjet + 1):
            mat = [[alg.zero()] * n for _ in range(n)]
            nonzero = False
            for a in range(n):
                fa = vec[a]
                for m in range(n):
                    d = fa.partial(m + 1, e)
                    if not d.is_zero:
                        mat[a][m] = d
                        nonzero = True
            if nonzero:
                key = (k, e)
                if key in coeffs:
                    prev = coeffs[key]
                    mat = [
                        [prev[a][b] + mat[a][b] for b in range(n)] for a in range(n)
                    ]
                coeffs[key] = tuple(tuple(row) for row in mat)
    return DiffOperator.build(alg, coeffs)


def _jacobian_adjoint(T: MiuraTransform):
    """L* with entries sum_e (-Dx)^e o (d image^b / d u^n_e)."""
    alg = T.alg
    n = alg.n
    out = {}
    ident = tuple(
        tuple(alg.one() if a == b else alg.zero() for b in range(n))
        for a in range(n)
    )
    out[(0, 0)] = [[ident[a][b] for b in range(n)] for a in range(n)]
    for k, vec in T.parts.items():
        if k > alg.gmax:
            continue
        maxjet = max((e.max_jet() for e in vec), default=0)
        for e in range(maxjet + 1):
            sign0 = 1 if e % 2 == 0 else -1
            for bidx in range(n):
                fb = vec[bidx]
                for nu in range(n):
                    d = fb.partial(nu + 1, e)
                    if d.is_zero:
                        continue
                    for j in range(e + 1):
                        c = Fraction(comb(e, j) * sign0)
                        key = (k, e - j)
                        mat = out.setdefault(
                            key, [[alg.zero()] * n for _ in range(n)]
                        )
                        mat[nu][bidx] = mat[nu][bidx] + d.dx(j).scale(c)
    return DiffOperator.build(
        alg, {k: tuple(tuple(r) for r in m) for k, m in out.items()}
    )


def operator_change_alphabet(P: DiffOperator, T: MiuraTransform) -> DiffOperator:
    """Re-express every coefficient through the transform, redistributing the
    dispersion orders the substitution produces.  No operator conjugation."""
    alg = P.alg
    out = {}
    for (g, s), mat in P.coeffs.items():
        for a in range(alg.n):
            for b in range(alg.n):
                e = mat[a][b]
                if e.is_zero:
                    continue
                img = substitute(e.shift_eps(g), T)
                for gg in img.eps_orders():
                    key = (gg, s)
                    dst = out.setdefault(key, [[alg.zero()] * alg.n for _ in range(alg.n)])
                    dst[a][b] = dst[a][b] + img.eps_piece(gg).drop_eps()
    return DiffOperator.build(
        alg, {k: tuple(tuple(r) for r in m) for k, m in out.items()}
    )


def conjugate_operator(P: DiffOperator, T: MiuraTransform, T_inv=None) -> DiffOperator:
    """Transformed operator: Jacobian o P o adjoint Jacobian, re-expressed.

    The coefficients of the composition are functions of the old variables;
    they are pushed into the new alphabet through the inverse transform.
    """
    if T.is_identity:
        return P
    if T_inv is None:
        T_inv = invert(T)
    L = _jacobian_operator(T)
    Lstar = _jacobian_adjoint(T)
    conj = L.compose(P).compose(Lstar)
    return operator_change_alphabet(conj, T_inv)
