"""Retractions and equivariant compilation.

A retraction is a bundle convolution undoing the arrow-bundle lift.  Sandwich
any objectwise maps between a lift and a retraction and the composite is
equivariant even when the maps are not; natural maps pass through unchanged.
"""

import numpy as np

import catequiv as cq
from catequiv.uat import TanhAffineMap

# Averaging retraction on C2 with the sign representation
elements, mult = cq.cyclic_group(2)
sign = {"e": [[1.0]], "g1": [[-1.0]]}
cat, X, Y = cq.build_group_category(elements, mult, rho_X=sign, rho_Y=sign)
R = cq.build_haar_retraction(cat, Y)
print("normalization factors folded into the kernel:", R.factors)

h = cq.BundleSection(Y, "*", {"e": [[2.0]], "g1": [[6.0]]})
print("averaging {v, w} ->", cq.bundle_conv_forward(R.kernel, h), "(= v/2 - w/2)")
sections = [cq.random_section(Y, np.random.default_rng(i)) for i in range(100)]
print("||R∘lift - id|| over 100 sections:", cq.check_retraction(R, Y, sections))

# Compile a random, deliberately non-equivariant family: the result commutes
# with the group action anyway
G = TanhAffineMap(X, Y, seed=5)
net = cq.compile_equivariant(R, G, X)
samples = [cq.random_section(X, np.random.default_rng(i)) for i in range(100)]
print("compiled-from-garbage equivariance residual:",
      cq.check_equivariance(net, cat, samples).max_residual)

# Projection property: compiling an already-natural family reproduces it
inner = cq.compile_equivariant(R, TanhAffineMap(X, Y, seed=7), X)
roundtrip = cq.compile_equivariant(R, cq.FragmentMap(inner), X)
worst = max(
    float(np.abs(cq.evaluate_at(inner, "*", s.data["*"]) -
                 cq.evaluate_at(roundtrip, "*", s.data["*"])).max())
    for s in samples
)
print("projection residual (compile of compiled):", worst)

# Thin categories get a block retraction instead: stack one summand per lower
# element, truncate/include blocks
chain = cq.build_poset_category(["0", "1"], [("0", "1")])
Yg, Rg = cq.build_graded_target(chain, {"0": 1, "1": 2})
print("graded fiber dims:", Yg.fiber_dim)
sections_g = [cq.random_section(Yg, np.random.default_rng(i)) for i in range(100)]
print("graded ||R∘lift - id||:", cq.check_retraction(Rg, Yg, sections_g))
