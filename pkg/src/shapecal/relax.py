"""Moment relaxations of polynomial matrix inequality programs.

A PMI program minimizes a polynomial cost subject to symmetric matrices of
polynomials being PSD, optionally with polynomial equalities.  When the data
are not affine, the program is approximated from below by the standard
moment hierarchy: every monomial x^alpha up to degree 2*delta becomes a
moment variable y_alpha, the cost is linearized through the Riesz
functional, and the PSD constraints turn into the moment matrix
M_delta(y) = l_y(psi psi') and one localizing matrix l_y((psi psi') (x) G)
per constraint at order delta - gamma, where gamma is 1 for constraint
degree up to 2 and ceil(deg/2) beyond.  The bounds are monotone in delta
and reach the global minimum at a finite order for the problems treated
here.

Extraction reads the candidate minimizer off the first-order moments and
certifies it by (a) a flat-extension rank comparison between the moment
matrices of consecutive orders and (b) direct feasibility plus matching of
the candidate cost against the relaxation bound; an uncertified bound is a
valid, honestly reported outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .poly import Basis, LinearForm, Polynomial, PolyMatrix, basis, riesz


@dataclass
class PmiProgram:
    """Polynomial cost, PSD polynomial-matrix constraints, polynomial equalities."""

    dim: int
    cost: Polynomial
    constraints: list
    equalities: list = field(default_factory=list)

    def __post_init__(self):
        if self.cost.dim != self.dim:
            raise ValueError("cost dimension mismatch")
        for G in self.constraints:
            if G.dim != self.dim:
                raise ValueError("constraint dimension mismatch")
        for q in self.equalities:
            if q.dim != self.dim:
                raise ValueError("equality dimension mismatch")

    def feasible(self, x, tol=1e-6):
        """Check a point against all constraints and equalities."""
        for G in self.constraints:
            if np.linalg.eigvalsh(G.eval(x))[0] < -tol:
                return False
        for q in self.equalities:
            if abs(q.eval(x)) > tol:
                return False
        return True


def block_diag(mats):
    """Merge polynomial matrices into one block-diagonal PolyMatrix."""
    mats = list(mats)
    if not mats:
        raise ValueError("need at least one matrix")
    dim = mats[0].dim
    total = sum(m.size for m in mats)
    zero = Polynomial.zero(dim)
    entries = np.full((total, total), zero, dtype=object)
    at = 0
    for m in mats:
        entries[at:at + m.size, at:at + m.size] = m.entries
        at += m.size
    return PolyMatrix(entries)


def gamma_offset(G):
    """Degree allowance consumed by a constraint matrix."""
    deg = G.degree
    return 1 if deg <= 2 else math.ceil(deg / 2)


def min_order(pmi):
    """Smallest admissible relaxation order for a PMI program."""
    gam = max((gamma_offset(G) for G in pmi.constraints), default=1)
    need = max(gam, math.ceil(pmi.cost.degree / 2))
    for q in pmi.equalities:
        need = max(need, math.ceil(q.degree / 2))
    return need


@dataclass
class MomentIndexing:
    """Position map for moment variables of one relaxation order."""

    order: int
    dim: int
    row_basis: Basis      # psi_delta, indexes moment-matrix rows
    moments: Basis        # all exponents up to degree 2*delta

    @classmethod
    def create(cls, delta, d):
        return cls(delta, d, basis(d, delta), basis(d, 2 * delta))

    def __len__(self):
        return len(self.moments)

    def position(self, alpha):
        return self.moments.position(alpha)

    def values(self, y):
        """Map a moment vector to {exponent: value}."""
        return {a: y[i] for i, a in enumerate(self.moments.monomials)}


def moment_matrix(delta, d):
    """Symbolic moment matrix: entry (i, j) is the exponent alpha_i + alpha_j.

    Equal exponent sums share one moment variable, which gives the matrix its
    Hankel-type repetition structure; entry (0, 0) is the constant exponent.
    """
    rows = basis(d, delta).monomials
    n = len(rows)
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = tuple(a + b for a, b in zip(rows[i], rows[j]))
    return out


def localizing_matrix(G, delta):
    """Entry-wise Riesz image of (psi_delta psi_delta') tensor G.

    Block (i, j) holds l_y(x^(alpha_i + alpha_j) * G); entries are
    LinearForms over moment variables.
    """
    rows = basis(G.dim, delta).monomials
    nb = len(rows)
    g = G.size
    out = np.empty((nb * g, nb * g), dtype=object)
    for i in range(nb):
        for j in range(nb):
            shift = tuple(a + b for a, b in zip(rows[i], rows[j]))
            for a in range(g):
                for b in range(g):
                    coeffs = {}
                    for beta, cval in G.entries[a, b].terms.items():
                        key = tuple(s + e for s, e in zip(shift, beta))
                        coeffs[key] = coeffs.get(key, 0.0) + cval
                    out[i * g + a, j * g + b] = LinearForm(coeffs)
    return out


def moment_matrix_value(y_map, delta, d):
    """Numeric moment matrix from an exponent-to-value map."""
    sym = moment_matrix(delta, d)
    n = sym.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = y_map[sym[i, j]]
    return out


def relax(pmi, delta):
    """Build the order-delta LMI relaxation of a PMI program.

    Variables are all moments y_alpha with |alpha| <= 2*delta; y_0 is pinned
    to 1 by an equality.  Each polynomial equality q contributes the affine
    equalities l_y(x^beta q) = 0 for every |beta| <= 2*delta - deg q.
    Returns (LmiProgram, MomentIndexing).
    """
    need = min_order(pmi)
    if delta < need:
        raise ValueError(f"relaxation order {delta} below minimum {need}")
    d = pmi.dim
    idx = MomentIndexing.create(delta, d)
    nvars = len(idx)
    zero_alpha = (0,) * d

    def form_to_affine(form):
        return sdp.AffineForm(
            {idx.position(a): c for a, c in form.coefficients.items()},
            form.constant)

    cost = form_to_affine(riesz(pmi.cost))

    blocks = []
    # Moment matrix block.
    sym = moment_matrix(delta, d)
    n = sym.shape[0]
    coeff = {}
    for i in range(n):
        for j in range(n):
            vi = idx.position(sym[i, j])
            coeff.setdefault(vi, np.zeros((n, n)))[i, j] += 0.5
            coeff[vi][j, i] += 0.5
    # The double loop adds each (i, j) and (j, i) once; diagonal got 1.0.
    blocks.append(sdp.AffineBlock(n, np.zeros((n, n)), coeff))

    # Localizing blocks, one per constraint, all at order delta - gamma with
    # the offset of the merged block-diagonal constraint.
    gam = max((gamma_offset(G) for G in pmi.constraints), default=1)
    for G in pmi.constraints:
        loc = localizing_matrix(G, delta - gam)
        m = loc.shape[0]
        constant = np.zeros((m, m))
        lcoeff = {}
        for i in range(m):
            for j in range(m):
                form = loc[i, j]
                constant[i, j] += form.constant
                for a, c in form.coefficients.items():
                    vi = idx.position(a)
                    lcoeff.setdefault(vi, np.zeros((m, m)))[i, j] += c
        blocks.append(sdp.AffineBlock(m, constant, lcoeff))

    equalities = [sdp.AffineForm({idx.position(zero_alpha): 1.0}, -1.0)]
    for q in pmi.equalities:
        budget = 2 * delta - q.degree
        for beta in basis(d, budget).monomials:
            shifted = Polynomial(d, {tuple(b + a for b, a in zip(beta, alpha)): c
                                     for alpha, c in q.terms.items()})
            equalities.append(form_to_affine(riesz(shifted)))

    return sdp.LmiProgram(nvars, cost, blocks, equalities), idx


@dataclass
class RelaxationResult:
    lower_bound: float
    moment_vector: np.ndarray
    extracted: np.ndarray | None
    certified: bool
    order: int
    rank_flat: bool = False
    candidate_cost: float = math.nan
    solver_status: str = ""


def extract(sol, idx, pmi, feas_tol=1e-6, gap_rtol=1e-5, rank_rtol=1e-6):
    """Read a candidate minimizer off a solved relaxation and certify it.

    The candidate is the vector of first-order moments.  It is certified
    when it is feasible for the PMI within ``feas_tol`` and either the flat
    rank test between consecutive moment matrices passes or its cost matches
    the relaxation bound within ``gap_rtol``.  Returns a RelaxationResult;
    uncertified is a valid outcome carrying the bound alone.
    """
    if sol.status != "optimal":
        raise ValueError(f"extract requires an optimal solution, got {sol.status}")
    d = pmi.dim
    y_map = idx.values(sol.z)
    x_star = np.array([y_map[tuple(1 if i == j else 0 for j in range(d))]
                       for i in range(d)])

    gam = max((gamma_offset(G) for G in pmi.constraints), default=1)
    M_hi = moment_matrix_value(y_map, idx.order, d)
    M_lo = moment_matrix_value(y_map, idx.order - gam, d)

    def numeric_rank(M):
        sv = np.linalg.svd(M, compute_uv=False)
        return int((sv > rank_rtol * sv[0]).sum()) if sv[0] > 0 else 0

    rank_hi = numeric_rank(M_hi)
    rank_flat = rank_hi == numeric_rank(M_lo)

    feasible = pmi.feasible(x_star, feas_tol)
    cand_cost = pmi.cost.eval(x_star)
    bound = sol.primal_objective
    cost_ok = abs(cand_cost - bound) <= gap_rtol * (1.0 + abs(bound))
    # A flat rank comparison certifies exactness of the bound, but only a
    # rank-one moment matrix makes the first-order moments an atom of the
    # representing measure; higher flat ranks are mixtures whose barycenter
    # need not be optimal, so they stay uncertified here.
    certified = bool(feasible and (cost_ok or (rank_flat and rank_hi == 1)))

    return RelaxationResult(
        lower_bound=bound,
        moment_vector=np.asarray(sol.z),
        extracted=x_star,
        certified=certified,
        order=idx.order,
        rank_flat=rank_flat,
        candidate_cost=cand_cost,
        solver_status=sol.status,
    )


def solve_order(pmi, delta, options=None):
    """Relax at one order, solve, and extract; returns a RelaxationResult."""
    program, idx = relax(pmi, delta)
    sol = sdp.solve(program, options)
    if sol.status != "optimal":
        return RelaxationResult(
            lower_bound=sol.primal_objective if sol.status == "optimal" else math.nan,
            moment_vector=np.asarray(sol.z),
            extracted=None,
            certified=False,
            order=delta,
            solver_status=sol.status,
        )
    return extract(sol, idx, pmi)


def structured_relaxation(pmi, mm_rows, loc_rows):
    """Moment program over explicit row bases instead of full degree levels.

    ``mm_rows`` lists the exponents spanning the moment matrix; it must
    contain the constant and every coordinate exponent.  ``loc_rows`` maps a
    constraint index to the exponent rows of its localizing matrix; blocks
    not listed are localized against the constant row only (their entries
    evaluated at the moments directly).  Any such program is sound: moment
    vectors of measures on the feasible set satisfy every block, so the
    optimum still bounds the PMI from below.  Used to tighten specific
    variable interactions without paying for a full order step.

    Returns (LmiProgram, MomentIndexing-like index of the variables used).
    """
    d = pmi.dim
    mm_rows = [tuple(r) for r in mm_rows]
    zero = (0,) * d
    if zero not in mm_rows:
        raise ValueError("moment rows must contain the constant exponent")
    for i in range(d):
        e_i = tuple(1 if j == i else 0 for j in range(d))
        if e_i not in mm_rows:
            raise ValueError("moment rows must contain every coordinate")

    def mono_sum(a, b):
        return tuple(x + y for x, y in zip(a, b))

    needed = set(pmi.cost.terms)
    for i, a in enumerate(mm_rows):
        for b_ in mm_rows[i:]:
            needed.add(mono_sum(a, b_))
    loc_entries = {}
    for ci, G in enumerate(pmi.constraints):
        rows = [tuple(r) for r in loc_rows.get(ci, [zero])]
        loc_entries[ci] = rows
        for i, a in enumerate(rows):
            for b_ in rows[i:]:
                shift = mono_sum(a, b_)
                for x in range(G.size):
                    for yv in range(G.size):
                        for beta in G.entries[x, yv].terms:
                            needed.add(mono_sum(shift, beta))
    variables = sorted(needed, key=lambda a: (sum(a), tuple(-v for v in a)))
    pos = {a: i for i, a in enumerate(variables)}
    nvars = len(variables)

    cost = sdp.AffineForm({pos[a]: c for a, c in pmi.cost.terms.items()}, 0.0)

    blocks = []
    n = len(mm_rows)
    coeff = {}
    for i in range(n):
        for j in range(n):
            vi = pos[mono_sum(mm_rows[i], mm_rows[j])]
            coeff.setdefault(vi, np.zeros((n, n)))[i, j] += 0.5
            coeff[vi][j, i] += 0.5
    blocks.append(sdp.AffineBlock(n, np.zeros((n, n)), coeff))

    for ci, G in enumerate(pmi.constraints):
        rows = loc_entries[ci]
        nb = len(rows)
        msize = nb * G.size
        constant = np.zeros((msize, msize))
        lcoeff = {}
        for i in range(nb):
            for j in range(nb):
                shift = mono_sum(rows[i], rows[j])
                for x in range(G.size):
                    for yv in range(G.size):
                        for beta, cval in G.entries[x, yv].terms.items():
                            vi = pos[mono_sum(shift, beta)]
                            lcoeff.setdefault(vi, np.zeros((msize, msize)))[
                                i * G.size + x, j * G.size + yv] += cval
        blocks.append(sdp.AffineBlock(msize, constant, lcoeff))

    equalities = [sdp.AffineForm({pos[zero]: 1.0}, -1.0)]
    for q in pmi.equalities:
        if not all(a in pos for a in q.terms):
            raise ValueError("equality involves moments outside the basis")
        equalities.append(sdp.AffineForm(
            {pos[a]: c for a, c in q.terms.items()}, 0.0))

    program = sdp.LmiProgram(nvars, cost, blocks, equalities)
    return program, variables, pos


def structured_candidate(sol, variables, pos, pmi,
                         feas_tol=1e-6, gap_rtol=1e-5):
    """Candidate extraction for a structured relaxation solution."""
    d = pmi.dim
    x_star = np.array([sol.z[pos[tuple(1 if j == i else 0 for j in range(d))]]
                       for i in range(d)])
    feasible = pmi.feasible(x_star, feas_tol)
    cand_cost = pmi.cost.eval(x_star)
    bound = sol.primal_objective
    cost_ok = abs(cand_cost - bound) <= gap_rtol * (1.0 + abs(bound))
    return RelaxationResult(
        lower_bound=bound,
        moment_vector=np.asarray(sol.z),
        extracted=x_star,
        certified=bool(feasible and cost_ok),
        order=0,
        candidate_cost=cand_cost,
        solver_status=sol.status,
    )


def solve_hierarchy(pmi, delta_max=3, options=None):
    """Escalate the relaxation order until certified or the cap is reached.

    Returns (final RelaxationResult, list of per-order results).
    """
    history = []
    result = None
    for delta in range(min_order(pmi), delta_max + 1):
        result = solve_order(pmi, delta, options)
        history.append(result)
        if result.certified:
            break
    return result, history
