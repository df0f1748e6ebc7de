"""Thin-category specializations: lattices, graphs as 1-complexes, sheaf-style fields.

On thin categories the convolution collapses to per-object incidence sums and
the naturality condition becomes the intertwining law of the incidence
operators; both are solved with exactly the same machinery as the group case.
"""

import numpy as np

import catequiv as cq

# The diamond lattice
diamond = cq.build_poset_category(
    ["bot", "a", "b", "top"],
    [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")],
)
print("diamond arrows:", len(diamond.arrow_order))
F = cq.identity_functor(diamond, 2)
kernels = cq.solve_parameter_space(cq.assemble_in_constraints(diamond, F, F, "IN"))
print("admissible kernel dimension on the diamond:", len(kernels))

# Incidence-operator view: the per-object sums K L form a natural family;
# with identity transports this means they agree along comparabilities
k = kernels[0]
sigma_ops = {
    a: sum(diamond.weight[u] * k.entry(u, "*") @ F.L[u] for u in diamond.incoming_arrows(a))
    for a in diamond.objects
}
print("incidence operator gap bot vs top:",
      float(np.abs(sigma_ops["bot"] - sigma_ops["top"]).max()))

# A path graph as a face category with a global bottom channel
path = cq.graph_complex(["v1", "v2", "v3"], [("e12", "v1", "v2"), ("e23", "v2", "v3")])
face = cq.build_face_category(path, include_bottom=True)
print("face category objects:", face.objects)
print("incoming at e12:", [face.src(u) for u in face.incoming_arrows("e12")])

Ff = cq.identity_functor(face, 2)
ksf = cq.solve_parameter_space(cq.assemble_in_constraints(face, Ff, Ff, "IN"))
chans = cq.solve_scalar_channels(face, Ff)
print("kernel dim:", len(ksf), " channel dim:", len(chans))
net = cq.NetworkSpec(
    face,
    [cq.ConvLayer(ksf[0]), cq.GateLayer(cq.Activation("tanh"), chans[0]), cq.ConvLayer(ksf[1])],
    Ff, Ff,
)
samples = [cq.random_section(Ff, np.random.default_rng(i)) for i in range(100)]
print("sheaf-style depth-3 equivariance residual:",
      cq.check_equivariance(net, face, samples).max_residual)

# An inert bottom: zero-dimensional summand contributes nothing to the stacking
Yg, Rg = cq.build_graded_target(face, {c: (0 if c == cq.BOTTOM else 1) for c in face.objects})
print("graded dims with inert bottom:", Yg.fiber_dim)
sections = [cq.random_section(Yg, np.random.default_rng(i)) for i in range(50)]
print("graded retraction residual:", cq.check_retraction(Rg, Yg, sections))
