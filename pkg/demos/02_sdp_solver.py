"""The embedded semidefinite programming solver.

Small linear matrix inequality programs: a Schur-complement warm-up, a
hyperbola through the PSD cone, and the epigraph trick that turns a convex
quadratic objective into a linear one.
"""

import numpy as np

from shapecal import sdp

# minimize gamma  s.t.  [[1, 0.7], [0.7, gamma]] PSD   (optimum 0.49)
prog = sdp.LmiProgram(
    nvars=1,
    cost=sdp.AffineForm({0: 1.0}),
    blocks=[sdp.AffineBlock(2, np.array([[1.0, 0.7], [0.7, 0.0]]),
                            {0: np.array([[0.0, 0.0], [0.0, 1.0]])})],
)
sol = sdp.solve(prog)
print("Schur warm-up:", sol.status, "gamma* =", sol.z[0])

# minimize x1 + x2  s.t.  [[x1, 1], [1, x2]] PSD   (x1 x2 >= 1, optimum 2)
prog = sdp.LmiProgram(
    nvars=2,
    cost=sdp.AffineForm({0: 1.0, 1: 1.0}),
    blocks=[sdp.AffineBlock(2, np.array([[0.0, 1.0], [1.0, 0.0]]),
                            {0: np.diag([1.0, 0.0]),
                             1: np.diag([0.0, 1.0])})],
)
sol = sdp.solve(prog)
print("hyperbola:", sol.status, "optimum", sol.primal_objective, "at", sol.z)

# Equalities are eliminated before the interior-point loop runs.
prog = sdp.LmiProgram(2, sdp.AffineForm({0: 1.0, 1: 1.0}), prog.blocks,
                      [sdp.AffineForm({0: 1.0}, -3.0)])  # x1 = 3
sol = sdp.solve(prog)
print("pinned x1 = 3:", sol.z, "objective", sol.primal_objective)

# Epigraph of a random convex quadratic k'Mk + m'k + c: minimizing the
# extra variable gamma solves the least-squares problem.
rng = np.random.default_rng(1)
A = rng.normal(size=(40, 6))
b = rng.normal(size=40)
M, m, c = A.T @ A, -2 * A.T @ b, float(b @ b)
bld = sdp.LmiBuilder()
bld.add_epigraph(M, m, c, [f"k{i}" for i in range(6)])
bld.set_cost({"gamma": 1.0})
sol = sdp.solve(bld.build(), sdp.SolverOptions(gap_tol=1e-9, feas_tol=1e-9))
k_sdp = sol.z[:6]
k_ls = np.linalg.solve(M, -0.5 * m)
print("\nleast squares via the epigraph block:")
print("  gamma* =", sol.primal_objective)
print("  max |k_sdp - k_normal_equations| =", np.abs(k_sdp - k_ls).max())
print("  duality gap:", sol.relative_gap)
