"""Neighbourhood groupoids: local weight sharing from rooted ball isomorphisms.

Cells of a complex become objects; arrows are isomorphisms between rooted
k-balls.  Solving the intertwining constraint over this groupoid recovers the
weight-sharing patterns message-passing layers use, and the solved local
kernels commute with every ball isomorphism globally.
"""

import numpy as np

import catequiv as cq

triangle = cq.graph_complex(
    ["v1", "v2", "v3"], [("e12", "v1", "v2"), ("e13", "v1", "v3"), ("e23", "v2", "v3")]
)

# Rooted 1-balls around two vertices are isomorphic in exactly two ways
p1 = cq.rooted_patch(triangle, "v1", 1)
p2 = cq.rooted_patch(triangle, "v2", 1)
for iso in cq.enumerate_rooted_isomorphisms(p1, p2):
    print("rooted isomorphism:", iso)

gpd = cq.build_neighbourhood_groupoid(triangle, 1)
print("objects:", len(gpd.objects), " arrows:", len(gpd.arrow_order),
      " groupoid:", gpd.is_groupoid())

# Patch-stacking functors: the fiber at a root stacks one stalk per ball cell,
# arrows act by coordinate permutation
Xk, Yk = cq.build_neighbourhood_functors(triangle, 1, gpd, d_X=1, d_Y=1)
print("fiber dims:", {c: Xk.fiber_dim[c] for c in gpd.objects})

# Steerable local kernels: per-root matrices commuting with the reindexings.
# On the triangle that means (root coefficient + shared neighbour coefficient)
# per orbit, giving dimension 4.
families = cq.solve_natural_linear_family(gpd, Xk, Yk)
print("intertwiner dimension:", len(families))
print("a basis element at v1 (coords [v1, e12, e13]):", np.round(families[0]["v1"], 3))

# Each solved family induces a rooted-local operator commuting with every arrow
rng = np.random.default_rng(0)
coef = rng.normal(size=len(families))
K = {a: sum(c * f[a] for c, f in zip(coef, families)) for a in gpd.objects}
worst = 0.0
for u in gpd.arrow_order:
    t, s = gpd.src(u), gpd.tgt(u)
    x = rng.normal(size=Xk.dim(s))
    lhs = K[t] @ (cq.transport_operator(Xk, u) @ x)
    rhs = cq.transport_operator(Yk, u) @ (K[s] @ x)
    worst = max(worst, float(np.abs(lhs - rhs).max()))
print("rooted-locality residual over all arrows:", worst)

# k = 0 collapses to a discrete-orbit groupoid: one arrow between same-dim cells
g0 = cq.build_neighbourhood_groupoid(triangle, 0)
print("k=0 hom sizes (v1,v2)/(v1,e12):",
      len(g0.hom("v1", "v2")), len(g0.hom("v1", "e12")))
