"""Admissible kernels as nullspaces: assemble naturality constraints, solve, convolve.

The naturality law a convolution kernel must satisfy is linear in the kernel
entries, so the admissible set is the nullspace of an assembled matrix.
"""

import numpy as np

import catequiv as cq

elements, mult = cq.cyclic_group(2)
trivial = {"e": [[1.0]], "g1": [[1.0]]}
sign = {"e": [[1.0]], "g1": [[-1.0]]}

# trivial -> sign: the constraint K(e) + K(g) = 0 leaves a one-dim space
cat, X, Y = cq.build_group_category(elements, mult, rho_X=trivial, rho_Y=sign)
system = cq.assemble_in_constraints(cat, X, Y, kind="IN")
print("constraint rows:", system.matrix.shape[0], " unknowns:", system.layout.size)
basis = cq.solve_parameter_space(system)
print("admissible dimension:", len(basis))
k = basis[0]
print("basis kernel entries:", {key: v.ravel().tolist() for key, v in k.entries.items()})
print("re-substitution residual:", system.residual(k))

# The convolution this kernel induces is equivariant by construction
net = cq.NetworkSpec(cat, [cq.ConvLayer(k)], X, Y)
samples = [cq.random_section(X, np.random.default_rng(i)) for i in range(100)]
print("equivariance residual:", cq.check_equivariance(net, cat, samples).max_residual)

# Pointwise steerability is stronger than integrated naturality: every kernel
# satisfying the transport law solves the assembled system too
catss, Xs, Ys = cq.build_group_category(elements, mult, rho_X=sign, rho_Y=sign)
steer = cq.solve_steerable_space(catss, Xs, Ys)
in_system = cq.assemble_in_constraints(catss, Xs, Ys, kind="IN")
for s in steer:
    print("steer residual:", cq.check_pointwise_steerability(catss, s),
          " naturality residual:", in_system.residual(s))

# Natural biases and the L1/Lipschitz bookkeeping
print("natural bias dims: sign ->", len(cq.solve_natural_bias(catss, Ys)),
      ", trivial ->", len(cq.solve_natural_bias(cat, X)))
bound = cq.compute_l1_bound(k, "*")
print("per-arrow kernel norms:", bound.table, " weighted total:", bound.total,
      " conv Lipschitz bound:", bound.lipschitz)
