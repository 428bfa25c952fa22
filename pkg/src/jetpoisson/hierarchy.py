"""Hamiltonian densities, hierarchy flows, and the first deformed bracket.

All densities come from the two-point functions: the dispersionless flows
read off the genus-0 jets, the full flows contract the deformed bracket with
variational derivatives in the fast alphabet.  The deformed bracket itself is
the conjugation of the undeformed hydrodynamic operator through the
quasi-triviality transform, with its polynomiality checked rather than
assumed.
"""

from __future__ import annotations

from .algebra import DiffExpr, JetAlgebra
from .functionals import DiffOperator
from .jetform import JetData
from .transform import MiuraTransform, conjugate_operator, invert, substitute


class FactorizationError(ValueError):
    pass


def hamiltonian_density_v(jd: JetData, beta, p, gmax=0):
    """Jet densities per genus for the Hamiltonian labelled (beta, p).

    The p = -1 densities are the Casimir coordinates.  Densities at genus g
    are the jet forms of the two-point functions shifted by one degree.
    """
    alg = jd.alg
    if p == -1:
        out = alg.zero()
        for c in range(1, jd.sd.n + 1):
            coef = jd.sd.table.eta[beta - 1][c - 1]
            if coef:
                out = out + alg.u(c, 0).scale(coef)
        return {0: out}
    return {
        g: jd.omega_jet(g, beta, p + 1, 1, 0)
        for g in range(gmax + 1)
    }


def density_to_w(parts, W_inv: MiuraTransform) -> DiffExpr:
    """Assemble genus parts and re-express them in the fast alphabet."""
    alg = W_inv.alg
    combined = alg.zero()
    for g, e in parts.items():
        combined = combined + e.shift_eps(g)
    return substitute(combined, W_inv)


def hamiltonian_density_w(jd: JetData, beta, p, W_inv: MiuraTransform, gmax=0):
    """Density in the fast alphabet.

    The p = -1 class keeps its coordinate representative: re-expressing the
    slow coordinate would add a total derivative with poles while the two
    functionals agree, so the polynomial representative is canonical here.
    """
    if p == -1:
        alg = jd.alg
        out = alg.zero()
        for c in range(1, jd.sd.n + 1):
            coef = jd.sd.table.eta[beta - 1][c - 1]
            if coef:
                out = out + alg.u(c, 0).scale(coef)
        return out
    return density_to_w(hamiltonian_density_v(jd, beta, p, gmax), W_inv)


def principal_flow(jd: JetData, beta, q):
    """Dispersionless flow of the coordinates for the time (beta, q).

    The q = -1 Hamiltonians are Casimirs of the undeformed bracket, so their
    flow vanishes identically.
    """
    alg = jd.alg
    n = jd.sd.n
    if q == -1:
        return [alg.zero() for _ in range(n)]
    out = []
    for a in range(1, n + 1):
        acc = alg.zero()
        for c in range(1, n + 1):
            coef = jd.sd.table.eta_inv[a - 1][c - 1]
            if coef:
                acc = acc + jd.omega_jet(0, c, 0, beta, q).dx().scale(coef)
        out.append(acc)
    return out


def eta_operator(alg: JetAlgebra, eta_inv) -> DiffOperator:
    return DiffOperator.eta_dx(alg, eta_inv)


def first_bracket(jd: JetData, gmax, W=None, W_inv=None):
    """Conjugated hydrodynamic bracket in the fast alphabet.

    Returns (operator, transform, inverse transform); the caller checks
    polynomiality and residuals.
    """
    alg = jd.alg
    if W is None:
        W = jd.quasi_miura(gmax)
    if W_inv is None:
        W_inv = invert(W)
    P = DiffOperator.eta_dx(alg, jd.sd.table.eta_inv)
    A = conjugate_operator(P, W, W_inv)
    return A, W, W_inv


def polynomiality_flags(op: DiffOperator):
    """Per (g, s): True when the coefficient matrix has no Laurent pole."""
    out = {}
    for (g, s), mat in op.coeffs.items():
        out[(g, s)] = all(e.min_u11() >= 0 for row in mat for e in row)
    return out


def degree_shape_flags(op: DiffOperator, offset=1):
    """Per (g, s): True when entries are homogeneous of degree 2g+offset-s."""
    out = {}
    for (g, s), mat in op.coeffs.items():
        want = 2 * g + offset - s
        ok = True
        for row in mat:
            for e in row:
                if e.is_zero:
                    continue
                sig = e.grade()
                if sig is None or sig.std != want:
                    ok = False
        out[(g, s)] = ok
    return out


def full_flow(jd: JetData, A: DiffOperator, h_w: DiffExpr):
    """Flow of the full hierarchy: the bracket applied to the variational
    derivative of a Hamiltonian density in the fast alphabet."""
    n = jd.sd.n
    covec = [h_w.var_deriv(c) for c in range(1, n + 1)]
    return A.apply(covec)


def factor_dx(A: DiffOperator) -> DiffOperator:
    """Solve A = Dx o T for T; fails when the constant term is not exact."""
    alg = A.alg
    n = alg.n
    out = {}
    by_g = {}
    for (g, s), mat in A.coeffs.items():
        by_g.setdefault(g, {})[s] = mat
    for g, smat in by_g.items():
        smax = max(smat)
        # descending: T_{s-1} = A_s - dx(T_s)
        current = {}
        prev = None
        for s in range(smax, 0, -1):
            mat = smat.get(s)
            rows = []
            for a in range(n):
                row = []
                for b in range(n):
                    e = mat[a][b] if mat else alg.zero()
                    if prev is not None:
                        e = e - prev[a][b].dx()
                    row.append(e)
                rows.append(tuple(row))
            prev = tuple(rows)
            current[s - 1] = prev
        residual_ok = True
        mat0 = smat.get(0)
        for a in range(n):
            for b in range(n):
                e = mat0[a][b] if mat0 else alg.zero()
                if prev is not None:
                    e = e - prev[a][b].dx()
                if not e.is_zero:
                    residual_ok = False
        if not residual_ok:
            raise FactorizationError(
                "constant term at order %d is not a total derivative" % (2 * g)
            )
        for s, mat in current.items():
            out[(g, s)] = mat
    return DiffOperator.build(alg, out)


def invert_tilde(T: DiffOperator, eta, eta_inv) -> DiffOperator:
    """Inverse of an operator that is the pairing plus positive-order terms.

    Index convention: the input carries two upper indices, the output two
    lower ones, so composing input o output is the identity endomorphism.
    """
    alg = T.alg
    n = alg.n
    const_eta_inv = DiffOperator.build(
        alg,
        {
            (0, 0): tuple(
                tuple(alg.const(eta[a][b]) for b in range(n)) for a in range(n)
            )
        },
    )
    # T = eta + D with D of positive dispersion order; anything else would
    # need a non-terminating geometric series
    D = DiffOperator.build(
        alg, {k: m for k, m in T.coeffs.items() if k != (0, 0)}
    )
    base = T.coeffs.get((0, 0))
    if base is not None:
        corr = [[base[a][b] - alg.const(eta_inv[a][b]) for b in range(n)] for a in range(n)]
        if any(not e.is_zero for row in corr for e in row):
            raise FactorizationError("the order-zero block must be the pairing")
    if any(g == 0 for (g, _) in D.coeffs):
        raise FactorizationError("the order-zero part must be constant")
    out = const_eta_inv
    term = const_eta_inv
    for _ in range(alg.gmax):
        term = const_eta_inv.compose(D.compose(term)).scale(-1)
        if term.is_zero:
            break
        out = out + term
    return out
