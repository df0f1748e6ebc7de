"""Scalar gates and multi-layer networks.

A gate multiplies each fiber vector by an activation of a natural scalar
channel of it.  Channels are solved from the same kind of linear system as
kernels, and a network built from solved pieces is equivariant no matter how
its coefficients are mixed.
"""

import numpy as np

import catequiv as cq

# C2 acting on R^2 by diag(1, -1): the trivial coordinate carries a channel
elements, mult = cq.cyclic_group(2)
rep = {"e": np.eye(2), "g1": np.diag([1.0, -1.0])}
cat, X, _ = cq.build_group_category(elements, mult, rho_X=rep, rho_Y=rep)

channels = cq.solve_scalar_channels(cat, X)
print("channel dimension:", len(channels))
print("channel matrix (projects the invariant coordinate):", channels[0].matrices["*"])

# Gate behaviour: relu closes on negative channel values
relu = cq.Activation("relu")
z = cq.Section(X, {"*": np.array([[-1.0, 3.0]])})
print("gated (-1,3):", cq.gate_forward(relu, channels[0], z).data["*"])
z2 = cq.Section(X, {"*": np.array([[2.0, 3.0]])})
print("gated (2,3):", cq.gate_forward(relu, channels[0], z2).data["*"])

# A depth-3 network from solved pieces, with randomly mixed coefficients
kernels = cq.solve_parameter_space(cq.assemble_in_constraints(cat, X, X, "IN"))
biases = cq.solve_natural_bias(cat, X)
rng = np.random.default_rng(0)


def mix():
    coef = rng.normal(size=len(kernels))
    return {
        key: sum(c * k.entries[key] for c, k in zip(coef, kernels))
        for key in kernels[0].entries
    }
k1 = cq.CategoryKernel(X, X, mix(), biases[0], regime="IN")
k2 = cq.CategoryKernel(X, X, mix(), None, regime="IN")
net = cq.NetworkSpec(
    cat,
    [cq.ConvLayer(k1), cq.GateLayer(cq.Activation("tanh"), channels[0]), cq.ConvLayer(k2)],
    X, X,
)
samples = [cq.random_section(X, np.random.default_rng(i)) for i in range(200)]
report = cq.check_equivariance(net, cat, samples)
print("depth-3 equivariance residual over 200 sections:", report.max_residual)

# Measured Lipschitz quotients stay under the kernel bound
single = cq.NetworkSpec(cat, [cq.ConvLayer(k1)], X, X)
pairs = [(rng.uniform(-1, 1, (1, 2)), rng.uniform(-1, 1, (1, 2))) for _ in range(500)]
print("measured quotient:", cq.measure_lipschitz_quotients(single, "*", pairs),
      " bound:", cq.compute_l1_bound(k1, "*").lipschitz)
