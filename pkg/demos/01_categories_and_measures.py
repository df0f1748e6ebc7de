"""Finite categories with weights: construction, validation, measure diagnostics.

Walks through the two smallest examples used everywhere else: the cyclic
group C2 as a one-object category and a chain poset as a thin category.
"""

import catequiv as cq

# C2 as a one-object category: two arrows, composition = group multiplication
elements, mult = cq.cyclic_group(2)
cat, X, Y = cq.build_group_category(elements, mult,
                                    rho_Y={"e": [[1.0]], "g1": [[-1.0]]})
print(cq.validate_category(cat))
print("incoming arrows at *:", cat.incoming_arrows("*"))

# A chain poset 0 <= 1: three arrows (two identities and the step)
chain = cq.build_poset_category(["0", "1"], [("0", "1")])
print(cq.validate_category(chain))
print("incoming at 1:", chain.incoming_arrows("1"), " at 0:", chain.incoming_arrows("0"))

# Break an axiom on purpose: redirect e∘g to e and watch the report name it
bad_mult = dict(mult)
bad_mult[("e", "g1")] = "e"
broken = cq.FiniteCategory(["*"], [(g, "*", "*") for g in elements], {"*": "e"}, bad_mult)
print(cq.validate_category(broken))

# Measure diagnostics.  Counting weights on a group are left-coherent
# (translation invariance of counting measure); chains are not, because
# nothing maps onto the top identity.  Neither property is required by any
# layer; these are diagnostics only.
print("C2 left-coherent: ", cq.check_measure_properties(cat, "left_coherent").ok)
print("C2 bi-coherent:   ", cq.check_measure_properties(cat, "bi_coherent").ok)
chain3 = cq.build_poset_category(["0", "1", "2"], [("0", "1"), ("1", "2")])
report = cq.check_measure_properties(chain3, "left_coherent")
print("3-chain left-coherent:", report.ok)
print("  first witness:", report.violations[0])
print("3-chain NSP:", cq.check_measure_properties(chain3, "nsp").ok)
