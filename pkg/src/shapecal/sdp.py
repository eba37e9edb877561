"""Dense primal-dual interior-point solver for small linear matrix inequality
programs, plus the Schur-complement construction that turns a convex
quadratic cost into a linear (epigraph) objective.

A program is

    minimize    c' z + c0
    subject to  A0_b + sum_i z_i A_{b,i}  PSD   for every block b,
                e_j' z + f_j = 0               for every equality j.

Equalities are removed up front by restricting z to an affine subspace
(particular solution plus orthonormal null-space basis, both from one SVD);
an inconsistent system is reported as infeasible without running the
interior-point loop.  The reduced problem is the dual side of a standard
conic pair, and is solved by an infeasible-start path-following method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  All linear
algebra is dense: the intended problem sizes are blocks up to roughly 100
and a few hundred to a thousand variables, where forming the Schur
complement explicitly is both simplest and fast.

The solver is reentrant and keeps no global state; a single call is
single-threaded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .poly import Polynomial


class SdpError(Exception):
    pass


class IndefiniteMatrixError(SdpError):
    pass


@dataclass
class AffineForm:
    """Sparse affine expression over decision variables: sum c_i z_i + const."""

    coefficients: dict
    constant: float = 0.0

    def dense(self, nvars):
        v = np.zeros(nvars)
        for i, c in self.coefficients.items():
            v[i] = c
        return v

    def eval(self, z):
        return self.constant + sum(c * z[i] for i, c in self.coefficients.items())


@dataclass
class AffineBlock:
    """Matrix-valued affine map: constant + sum_i z_i coeff[i], all symmetric."""

    size: int
    constant: np.ndarray
    coeff: dict  # var index -> (size, size) symmetric ndarray

    def __post_init__(self):
        self.constant = _sym_check(np.asarray(self.constant, dtype=float),
                                   self.size)
        self.coeff = {int(i): _sym_check(np.asarray(m, dtype=float), self.size)
                      for i, m in self.coeff.items()}

    def value_at(self, z):
        out = self.constant.copy()
        for i, m in self.coeff.items():
            out += z[i] * m
        return out

    def tensor(self, nvars):
        A = np.zeros((nvars, self.size, self.size))
        for i, m in self.coeff.items():
            A[i] = m
        return A


def _sym_check(m, size):
    if m.shape != (size, size):
        raise ValueError(f"matrix shape {m.shape} does not match block size {size}")
    if not np.allclose(m, m.T, atol=1e-12 * (1.0 + np.abs(m).max())):
        raise ValueError("block matrices must be symmetric")
    return 0.5 * (m + m.T)


@dataclass
class LmiProgram:
    nvars: int
    cost: AffineForm
    blocks: list
    equalities: list = field(default_factory=list)

    def __post_init__(self):
        for blk in self.blocks:
            for i in blk.coeff:
                if not 0 <= i < self.nvars:
                    raise ValueError(f"block references variable {i} >= {self.nvars}")
        for eq in self.equalities:
            for i in eq.coefficients:
                if not 0 <= i < self.nvars:
                    raise ValueError(f"equality references variable {i}")


@dataclass
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7       # relative duality gap
    max_iterations: int = 100
    step_fraction: float = 0.98
    unbounded_threshold: float = 1e12
    centering_steps: int = 2    # pure centering steps after convergence
    # When progress stalls before the targets are met, the best iterate is
    # still accepted as optimal if it meets these (defaults: the targets).
    accept_feas_tol: float = None
    accept_gap_tol: float = None
    stall_iterations: int = 10
    verbose: bool = False

    def __post_init__(self):
        if self.accept_feas_tol is None:
            self.accept_feas_tol = self.feas_tol
        if self.accept_gap_tol is None:
            self.accept_gap_tol = self.gap_tol


@dataclass
class SdpSolution:
    z: np.ndarray
    primal_objective: float
    dual_objective: float
    status: str  # optimal | infeasible | unbounded | maxIterations | numericalFailure
    iterations: int
    # Conic-side matrices of the standard-form pair, one per block, on
    # optimal exits; complementary to the block slacks, they carry the
    # active-face geometry (rank-one for an epigraph block at its optimum).
    block_duals: list = None

    @property
    def relative_gap(self):
        return abs(self.primal_objective - self.dual_objective) / (
            1.0 + abs(self.primal_objective))


# ---------------------------------------------------------------------------
# PSD factorization and the quadratic epigraph block
# ---------------------------------------------------------------------------

def factor_psd(M, rtol=1e-10):
    """Factor a PSD matrix as M = L' L with rows of zero eigenvalue dropped.

    Eigenvalues more negative than -rtol * (1 + lambda_max) raise; small
    negative dust is clamped to zero.  L may be rectangular.
    """
    M = np.asarray(M, dtype=float)
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    scale = 1.0 + max(w[-1], 0.0)
    if w[0] < -rtol * scale:
        raise IndefiniteMatrixError(
            f"matrix has eigenvalue {w[0]:.3e}, beyond PSD tolerance")
    w = np.clip(w, 0.0, None)
    keep = w > 1e-14 * scale
    if not keep.any():
        return np.zeros((0, M.shape[0]))
    return (np.sqrt(w[keep])[:, None] * V[:, keep].T)


def epigraph_block(M, m, c, var_indices, gamma_index):
    """Affine block F with F(z) PSD iff k' M k + m' k + c <= gamma.

    ``var_indices`` gives the program indices of the k variables (one per
    row of M) and ``gamma_index`` the epigraph variable.  Uses the Schur
    complement of the identity corner: F = [[I, Lk], [k'L', gamma - m'k - c]]
    with M = L'L from the spectral factorization.
    """
    L = factor_psd(M)
    m = np.asarray(m, dtype=float)
    rank = L.shape[0]
    size = rank + 1
    constant = np.zeros((size, size))
    constant[:rank, :rank] = np.eye(rank)
    constant[rank, rank] = -float(c)
    coeff = {}
    for j, vi in enumerate(var_indices):
        mat = np.zeros((size, size))
        mat[:rank, rank] = L[:, j]
        mat[rank, :rank] = L[:, j]
        mat[rank, rank] = -m[j]
        coeff[vi] = coeff.get(vi, np.zeros((size, size))) + mat
    g = np.zeros((size, size))
    g[rank, rank] = 1.0
    coeff[gamma_index] = coeff.get(gamma_index, np.zeros((size, size))) + g
    return AffineBlock(size, constant, coeff)


def quadratic_to_epigraph(M, m, c):
    """Epigraph block over a fresh variable layout (k..., gamma).

    Returns (gamma index, block); k occupies indices 0..len(m)-1 and gamma
    the next one.  Convenience wrapper over ``epigraph_block`` for callers
    that build a program around a single quadratic.
    """
    nk = len(m)
    return nk, epigraph_block(M, m, c, list(range(nk)), nk)


# ---------------------------------------------------------------------------
# Program builder over named variables
# ---------------------------------------------------------------------------

class LmiBuilder:
    """Incremental LMI program assembly with string-named variables."""

    def __init__(self):
        self.names = []
        self.index = {}
        self._blocks = []
        self._equalities = []
        self._cost = ({}, 0.0)

    def variable(self, name):
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
        return self.index[name]

    def variables(self, names):
        return [self.variable(n) for n in names]

    def set_cost(self, coefficients, constant=0.0):
        self._cost = ({self.variable(n): float(c)
                       for n, c in coefficients.items()}, float(constant))

    def add_block(self, block):
        self._blocks.append(block)

    def add_affine_matrix(self, entries, var_names):
        """Block from a square object array of degree <= 1 Polynomials.

        ``var_names`` maps polynomial variable positions to builder names.
        """
        entries = np.asarray(entries, dtype=object)
        n = entries.shape[0]
        constant = np.zeros((n, n))
        coeff = {}
        for i in range(n):
            for j in range(n):
                for alpha, cval in entries[i, j].terms.items():
                    deg = sum(alpha)
                    if deg == 0:
                        constant[i, j] += cval
                    elif deg == 1:
                        vi = self.variable(var_names[alpha.index(1)])
                        coeff.setdefault(vi, np.zeros((n, n)))[i, j] += cval
                    else:
                        raise ValueError("block entry is not affine")
        self._blocks.append(AffineBlock(n, constant, coeff))

    def add_equality_poly(self, p, var_names):
        """Equality (affine Polynomial == 0) over mapped variable names."""
        coeffs = {}
        constant = 0.0
        for alpha, cval in p.terms.items():
            deg = sum(alpha)
            if deg == 0:
                constant += cval
            elif deg == 1:
                vi = self.variable(var_names[alpha.index(1)])
                coeffs[vi] = coeffs.get(vi, 0.0) + cval
            else:
                raise ValueError("equality is not affine")
        self._equalities.append(AffineForm(coeffs, constant))

    def add_equality(self, coefficients, constant=0.0):
        self._equalities.append(AffineForm(
            {self.variable(n): float(c) for n, c in coefficients.items()},
            float(constant)))

    def add_epigraph(self, M, m, c, k_names, gamma_name="gamma"):
        idx = [self.variable(n) for n in k_names]
        gi = self.variable(gamma_name)
        self._blocks.append(epigraph_block(M, m, c, idx, gi))
        return gi

    def build(self):
        coeffs, const = self._cost
        return LmiProgram(len(self.names), AffineForm(coeffs, const),
                          list(self._blocks), list(self._equalities))

    def value(self, solution, name):
        return solution.z[self.index[name]]


# ---------------------------------------------------------------------------
# Interior-point solver
# ---------------------------------------------------------------------------

def _chol_with_jitter(M, scale):
    for jitter in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
        try:
            return np.linalg.cholesky(M + jitter * scale * np.eye(M.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("Cholesky failed after regularization")


def _max_step(chol_factor, direction):
    """Largest a with  M + a * direction  PSD, given M = LL'."""
    K = solve_triangular(chol_factor, direction, lower=True)
    K = solve_triangular(chol_factor, K.T, lower=True).T
    K = 0.5 * (K + K.T)
    lam = np.linalg.eigvalsh(K)[0]
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _eliminate_equalities(program):
    """Restrict to the equality-feasible affine subspace.

    Returns (z0, N, status) with z = z0 + N w; status is 'ok' or
    'infeasible'.  N is either a dense null-space basis or, when every
    equality pins a single variable (the common case for moment programs),
    ("select", free_indices), which lets the caller slice block tensors
    instead of densifying them.
    """
    n = program.nvars
    eqs = program.equalities
    if not eqs:
        return np.zeros(n), ("select", np.arange(n)), "ok"
    E = np.zeros((len(eqs), n))
    f = np.zeros(len(eqs))
    for r, eq in enumerate(eqs):
        E[r] = eq.dense(n)
        f[r] = eq.constant

    # Round 1: propagate single-variable pins (z_i = value) cheaply.
    z0 = np.zeros(n)
    pinned = np.zeros(n, dtype=bool)
    active = np.ones(len(eqs), dtype=bool)
    changed = True
    while changed:
        changed = False
        for r in np.nonzero(active)[0]:
            nz = np.nonzero(np.abs(E[r]) > 1e-14)[0]
            if len(nz) == 0:
                if abs(f[r]) > 1e-10:
                    return z0, None, "infeasible"
                active[r] = False
            elif len(nz) == 1:
                i = nz[0]
                val = -f[r] / E[r, i]
                if pinned[i] and abs(z0[i] - val) > 1e-8 * (1 + abs(val)):
                    return z0, None, "infeasible"
                z0[i] = val
                pinned[i] = True
                active[r] = False
                f[active] += E[active, i] * val
                E[active, i] = 0.0
                changed = True

    free = np.nonzero(~pinned)[0]
    if not active.any():
        return z0, ("select", free), "ok"

    # Round 2: general elimination of the residual system over free vars.
    Ef = E[np.ix_(active, free)]
    ff = f[active]
    w0, *_ = np.linalg.lstsq(Ef, -ff, rcond=None)
    if np.abs(Ef @ w0 + ff).max() > 1e-8 * (1.0 + np.abs(ff).max()):
        return z0, None, "infeasible"
    _, sv, Vt = np.linalg.svd(Ef)
    tol = max(Ef.shape) * (sv[0] if sv.size else 0.0) * np.finfo(float).eps
    rank = int((sv > tol).sum())
    Nf = Vt[rank:].T
    z0[free] += w0
    N = np.zeros((n, Nf.shape[1]))
    N[free] = Nf
    return z0, ("dense", N), "ok"


def solve(program, options=None):
    """Solve an LMI program; see the module docstring for the method.

    The returned status is 'optimal' only when the relative duality gap and
    both residuals meet the configured tolerances.  Deterministic for
    identical inputs and options.
    """
    opts = options or SolverOptions()
    n = program.nvars
    if n < 1:
        raise ValueError("program needs at least one variable")
    if not program.blocks and not program.equalities:
        raise ValueError("program needs at least one block or equality")

    c_full = program.cost.dense(n)
    offset = program.cost.constant

    z0, basis, eq_status = _eliminate_equalities(program)
    if eq_status == "infeasible":
        return SdpSolution(z0, math.nan, math.nan, "infeasible", 0)
    selection = basis[0] == "select"

    # Reduced block data: C_b + sum_j w_j B_{b,j} must be PSD.
    Cs, Bs = [], []
    for blk in program.blocks:
        C = blk.constant.copy()
        for i, mat in blk.coeff.items():
            if z0[i]:
                C += z0[i] * mat
        Cs.append(C)
        if selection:
            free = basis[1]
            B = np.zeros((len(free), blk.size, blk.size))
            pos = {v: j for j, v in enumerate(free)}
            for i, mat in blk.coeff.items():
                if i in pos:
                    B[pos[i]] = mat
            Bs.append(B)
        else:
            Bs.append(np.tensordot(basis[1], blk.tensor(n), axes=(0, 0)))
    if selection:
        N = np.zeros((n, len(basis[1])))
        N[basis[1], np.arange(len(basis[1]))] = 1.0
        c_red = c_full[basis[1]]
    else:
        N = basis[1]
        c_red = N.T @ c_full
    offset = offset + float(c_full @ z0)

    # Constant-only feasibility and inert variable directions.
    live = np.zeros(N.shape[1], dtype=bool)
    for B in Bs:
        if B.size:
            live |= np.abs(B).max(axis=(1, 2)) > 1e-13
    dead = ~live
    if dead.any() and np.abs(c_red[dead]).max(initial=0.0) > 1e-11:
        return SdpSolution(z0, -math.inf, math.nan, "unbounded", 0)
    if (~live).all():
        ok = all(np.linalg.eigvalsh(C)[0] >= -opts.feas_tol * (1 + np.abs(C).max())
                 for C in Cs)
        status = "optimal" if ok else "infeasible"
        return SdpSolution(z0, offset, offset if ok else math.nan, status, 0)
    if dead.any():
        N = N[:, live]
        Bs = [B[live] for B in Bs]
        c_red = c_red[live]

    q = c_red.size
    m_sizes = [C.shape[0] for C in Cs]
    m_total = sum(m_sizes)

    # Standard conic pair: our z is the dual vector y with b = -c.  The flat
    # views drive every contraction with the Schur complement; moment-style
    # blocks are extremely sparse, so those go through CSR storage.
    b = -c_red
    As = [-B for B in Bs]
    A_flat = []
    for A in As:
        flat = A.reshape(q, -1)
        if flat.size > 1_000_000:
            density = np.count_nonzero(flat) / flat.size
            if density < 0.05:
                from scipy import sparse
                A_flat.append(sparse.csr_matrix(flat))
                continue
        A_flat.append(flat)

    b_scale = 1.0 + np.abs(b).max()
    C_scales = [1.0 + np.linalg.norm(C, "fro") for C in Cs]

    y = np.zeros(q)
    Xs, Ss = [], []
    for C, sc in zip(Cs, C_scales):
        lam_min = np.linalg.eigvalsh(C)[0]
        shift = max(0.0, sc - lam_min)
        Ss.append(C + shift * np.eye(C.shape[0]))
        Xs.append(b_scale * np.eye(C.shape[0]))

    def metrics(y, Xs, Ss):
        gap = sum(float(np.tensordot(X, S)) for X, S in zip(Xs, Ss))
        pobj = float(c_red @ y) + offset
        dobj = -sum(float(np.tensordot(C, X)) for C, X in zip(Cs, Xs)) + offset
        rp = b - sum(Af @ X.ravel() for Af, X in zip(A_flat, Xs))
        Rds = [C - S - np.tensordot(y, A, axes=(0, 0))
               for C, S, A in zip(Cs, Ss, As)]
        relgap = gap / (1.0 + max(abs(pobj), abs(dobj)))
        pres = max(np.linalg.norm(Rd, "fro") / sc
                   for Rd, sc in zip(Rds, C_scales))
        dres = np.abs(rp).max() / b_scale
        return gap, pobj, dobj, rp, Rds, relgap, pres, dres

    def take_step(y, Xs, Ss, rp, Rds, mu, mode):
        """One interior-point step; mode is 'mehrotra' or 'center'."""
        Gs, Ginvs, Ws, sigs = [], [], [], []
        for X, S in zip(Xs, Ss):
            Lx = _chol_with_jitter(X, 1.0 + np.abs(X).max())
            Ls = _chol_with_jitter(S, 1.0 + np.abs(S).max())
            _, sig, Vt = np.linalg.svd(Ls.T @ Lx)
            sig = np.maximum(sig, 1e-300)
            G = Lx @ Vt.T / np.sqrt(sig)
            Ginv = (np.sqrt(sig)[:, None] * Vt) @ np.linalg.inv(Lx)
            Gs.append(G)
            Ginvs.append(Ginv)
            Ws.append(G @ G.T)
            sigs.append(sig)

        # Schur complement M_ij = sum_b <A_i, W A_j W>, shared by the
        # predictor and corrector solves of this iteration.  The congruence
        # W A_i W runs as two large reshaped GEMMs over the stacked tensor.
        M = np.zeros((q, q))
        for A, Af, W in zip(As, A_flat, Ws):
            m = W.shape[0]
            AW = (A.reshape(q * m, m) @ W).reshape(q, m, m)
            U = (AW.transpose(0, 2, 1).reshape(q * m, m) @ W).reshape(q, m, m)
            UT = np.ascontiguousarray(U.reshape(q, -1).T)
            M += Af @ UT
        M = 0.5 * (M + M.T)
        Mchol = _chol_with_jitter(M, max(np.trace(M) / q, 1e-30))

        base_rhs = rp + sum(Af @ (W @ Rd @ W).ravel()
                            for Af, W, Rd in zip(A_flat, Ws, Rds))

        def kkt_solve(Rcs):
            rhs = base_rhs - sum(Af @ Rc.ravel()
                                 for Af, Rc in zip(A_flat, Rcs))
            dy = cho_solve((Mchol, True), rhs)
            dSs = [Rd - np.tensordot(dy, A, axes=(0, 0))
                   for Rd, A in zip(Rds, As)]
            dXs = [0.5 * ((Rc - W @ dS @ W) + (Rc - W @ dS @ W).T)
                   for Rc, W, dS in zip(Rcs, Ws, dSs)]
            dSs = [0.5 * (d + d.T) for d in dSs]
            return dy, dXs, dSs

        Lxs = [_chol_with_jitter(X, 1.0 + np.abs(X).max()) for X in Xs]
        Lss = [_chol_with_jitter(S, 1.0 + np.abs(S).max()) for S in Ss]

        if mode == "center":
            # Pure centering toward the current mu target; polishes the
            # iterate onto the central path without reducing mu.
            Rcs = [G @ np.diag(mu / sig - sig) @ G.T
                   for G, sig in zip(Gs, sigs)]
            dy, dXs, dSs = kkt_solve(Rcs)
        else:
            # Mehrotra: affine-scaling predictor, then corrector with the
            # second-order term expressed in the Nesterov-Todd scaled space.
            dy_a, dX_a, dS_a = kkt_solve([-X for X in Xs])
            ap = min(1.0, opts.step_fraction *
                     min(_max_step(L, d) for L, d in zip(Lxs, dX_a)))
            ad = min(1.0, opts.step_fraction *
                     min(_max_step(L, d) for L, d in zip(Lss, dS_a)))
            mu_aff = sum(float(np.tensordot(X + ap * dX, S + ad * dS))
                         for X, dX, S, dS in zip(Xs, dX_a, Ss, dS_a)) / m_total
            sigma = min(1.0, max(0.0, (max(mu_aff, 0.0) / mu)) ** 3)

            Rcs = []
            for G, Ginv, sig, dX, dS in zip(Gs, Ginvs, sigs, dX_a, dS_a):
                dXh = Ginv @ dX @ Ginv.T
                dSh = G.T @ dS @ G
                H = dXh @ dSh
                H = H + H.T
                D = (np.diag(2.0 * sigma * mu - 2.0 * sig ** 2) - H) \
                    / (sig[:, None] + sig[None, :])
                Rcs.append(G @ D @ G.T)
            dy, dXs, dSs = kkt_solve(Rcs)

        ap = min(1.0, opts.step_fraction *
                 min(_max_step(L, d) for L, d in zip(Lxs, dXs)))
        ad = min(1.0, opts.step_fraction *
                 min(_max_step(L, d) for L, d in zip(Lss, dSs)))
        if max(ap, ad) < 1e-10:
            raise np.linalg.LinAlgError("step length collapsed")
        y = y + ad * dy
        Xs = [X + ap * dX for X, dX in zip(Xs, dXs)]
        Ss = [S + ad * dS for S, dS in zip(Ss, dSs)]
        return y, Xs, Ss

    status = "maxIterations"
    best = None
    iterations = 0
    diverging = 0
    diverging_dual = 0
    last_improvement = 0
    mu_mark = math.inf
    res_mark = math.inf

    for it in range(opts.max_iterations):
        iterations = it + 1
        gap, pobj, dobj, rp, Rds, relgap, pres, dres = metrics(y, Xs, Ss)
        mu = gap / m_total

        if opts.verbose:
            print(f"  it {it:3d}  pobj {pobj:+.9e}  dobj {dobj:+.9e}  "
                  f"gap {relgap:.2e}  pres {pres:.2e}  dres {dres:.2e}")

        acceptable = pres <= opts.accept_feas_tol and dres <= opts.accept_feas_tol
        if best is None or (acceptable and abs(relgap) < best[5]):
            best = (y.copy(), [X.copy() for X in Xs], [S.copy() for S in Ss],
                    pobj, dobj, abs(relgap) if acceptable else np.inf)
            last_improvement = it
        if mu < 0.5 * mu_mark or max(pres, dres) < 0.5 * res_mark:
            mu_mark = min(mu_mark, mu)
            res_mark = min(res_mark, max(pres, dres))
            last_improvement = it
        feasible = pres <= opts.feas_tol and dres <= opts.feas_tol
        if feasible and relgap <= opts.gap_tol:
            status = "optimal"
            break
        if it - last_improvement >= opts.stall_iterations:
            # No measurable progress; classify from the best iterate below.
            break
        if pobj < -opts.unbounded_threshold and pres <= 1e-3:
            status = "unbounded"
            break
        if pobj < -1e-3 * opts.unbounded_threshold and dres > 1e-4:
            # Objective diverging while the conic side of the pair stays
            # infeasible: a recession direction, not slow convergence.
            diverging += 1
            if diverging >= 10:
                status = "unbounded"
                break
        if dobj > opts.unbounded_threshold and dres <= 1e-3:
            status = "infeasible"
            break
        if dobj > 1e-3 * opts.unbounded_threshold and pres > 1e-4:
            diverging_dual += 1
            if diverging_dual >= 10:
                status = "infeasible"
                break

        try:
            y, Xs, Ss = take_step(y, Xs, Ss, rp, Rds, mu, "mehrotra")
        except np.linalg.LinAlgError:
            status = "numericalFailure"
            break

    accepted = best is not None and best[5] <= opts.accept_gap_tol
    if status in ("maxIterations", "numericalFailure") and accepted:
        status = "optimal"

    if status == "optimal" and opts.centering_steps > 0 and accepted:
        # Pure centering steps from the best accepted iterate sharpen the
        # argmin coordinates: on the central path the minimizer block of y
        # is exact for every mu, so restoring centrality removes most of
        # the trailing wobble regardless of which exit path fired.
        y_c = best[0].copy()
        Xs_c = [X.copy() for X in best[1]]
        Ss_c = [S.copy() for S in best[2]]
        try:
            for _ in range(opts.centering_steps):
                gap, _p, _d, rp, Rds, _rg, _pr, _dr = metrics(y_c, Xs_c, Ss_c)
                mu = gap / m_total
                y_c, Xs_c, Ss_c = take_step(y_c, Xs_c, Ss_c, rp, Rds, mu,
                                            "center")
            _g, pobj_c, dobj_c, _rp, _Rd, relgap_c, pres_c, dres_c = \
                metrics(y_c, Xs_c, Ss_c)
            if pres_c <= opts.accept_feas_tol \
                    and dres_c <= opts.accept_feas_tol \
                    and relgap_c <= max(opts.accept_gap_tol, 2.0 * best[5]):
                best = (y_c, Xs_c, Ss_c, pobj_c, dobj_c, relgap_c)
        except np.linalg.LinAlgError:
            pass

    if status == "optimal":
        y_best, pobj, dobj = best[0], best[3], best[4]
        duals = best[1]
    else:
        pobj = float(c_red @ y) + offset
        y_best, dobj = y, math.nan
        duals = None
        if status == "unbounded":
            pobj = -math.inf

    z = z0 + N @ y_best
    return SdpSolution(z, pobj, dobj, status, iterations, duals)


# ---------------------------------------------------------------------------
# Debug dump
# ---------------------------------------------------------------------------

def program_to_json(program):
    """JSON document with cost, dense row-major blocks, and equalities."""
    doc = {
        "nvars": program.nvars,
        "cost": {
            "coefficients": {str(i): c
                             for i, c in sorted(program.cost.coefficients.items())},
            "constant": program.cost.constant,
        },
        "blocks": [
            {
                "size": blk.size,
                "constant": blk.constant.ravel().tolist(),
                "coefficients": {str(i): blk.coeff[i].ravel().tolist()
                                 for i in sorted(blk.coeff)},
            }
            for blk in program.blocks
        ],
        "equalities": [
            {
                "coefficients": {str(i): c
                                 for i, c in sorted(eq.coefficients.items())},
                "constant": eq.constant,
            }
            for eq in program.equalities
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
