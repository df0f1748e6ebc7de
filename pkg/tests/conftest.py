"""Shared fixtures and independent oracles.

The oracles re-evaluate defining formulas by direct summation, on purpose a
different code path from the assembled linear systems they cross-check.
"""

from __future__ import annotations

import numpy as np
import pytest

import catequiv as cq


# -- standard small structures -------------------------------------------------

def c2_pair(rep_x: str = "sign", rep_y: str = "sign"):
    reps = {
        "trivial": {"e": np.eye(1), "g1": np.eye(1)},
        "sign": {"e": np.eye(1), "g1": -np.eye(1)},
        "diag": {"e": np.eye(2), "g1": np.diag([1.0, -1.0])},
    }
    els, mult = cq.cyclic_group(2)
    return cq.build_group_category(els, mult, rho_X=reps[rep_x], rho_Y=reps[rep_y])


@pytest.fixture
def c2_sign():
    return c2_pair("sign", "sign")


@pytest.fixture
def c2_trivial_sign():
    return c2_pair("trivial", "sign")


@pytest.fixture
def chain2():
    return cq.build_poset_category(["0", "1"], [("0", "1")])


@pytest.fixture
def chain3():
    return cq.build_poset_category(["0", "1", "2"], [("0", "1"), ("1", "2")])


@pytest.fixture
def diamond():
    return cq.build_poset_category(
        ["bot", "a", "b", "top"],
        [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")],
    )


@pytest.fixture
def triangle():
    return cq.graph_complex(
        ["v1", "v2", "v3"], [("e12", "v1", "v2"), ("e13", "v1", "v3"), ("e23", "v2", "v3")]
    )


def c2_swap_groupoid():
    els, mult = cq.cyclic_group(2)
    action = {("e", "p"): "p", ("e", "q"): "q", ("g1", "p"): "q", ("g1", "q"): "p"}
    return cq.build_action_groupoid(els, mult, ["p", "q"], action)


# -- direct-evaluation oracles ---------------------------------------------------

def conv_oracle(cat, kernel, a, arr):
    """Category convolution by literal summation of the defining formula."""
    Z, Zp = kernel.source, kernel.target
    out = kernel.bias_at(a).copy()
    for y_idx, y in enumerate(Zp.points(a)):
        for u in cat.incoming_arrows(a):
            mu = cat.weight[u]
            if mu == 0.0:
                continue
            p = Z.pi_index(u, Z.tau_index(u, y_idx))
            out[y_idx] += mu * kernel.entry(u, y) @ (Z.L[u] @ arr[p])
    return out


def in_violation_vector(cat, Z, Zp, kernel):
    """Stacked LHS - RHS of the integrated naturality identity, evaluated
    directly on every basis input (independent of the assembled system)."""
    vals = []
    for w in cat.arrow_order:
        a, c = cat.src(w), cat.tgt(w)
        Lw = Zp.L[w]
        for y_idx, y in enumerate(Zp.points(a)):
            pw_idx = Zp.pi_index(w, y_idx)
            pw_y = Zp.points(c)[pw_idx]
            for p_idx in range(Z.n_points(c)):
                for j in range(Z.fiber_dim[c]):
                    x = np.zeros((Z.n_points(c), Z.fiber_dim[c]))
                    x[p_idx, j] = 1.0
                    lhs = np.zeros(Zp.fiber_dim[c])
                    for up in cat.incoming_arrows(c):
                        mu = cat.weight[up]
                        if mu == 0.0:
                            continue
                        ev = Z.pi_index(up, Z.tau_index(up, pw_idx))
                        lhs += mu * kernel.entry(up, pw_y) @ (Z.L[up] @ x[ev])
                    lhs = Lw @ lhs
                    rhs = np.zeros(Zp.fiber_dim[a])
                    for u in cat.incoming_arrows(a):
                        mu = cat.weight[u]
                        if mu == 0.0:
                            continue
                        wu = cat.compose(w, u)
                        ev = Z.pi_index(wu, Z.tau_index(u, y_idx))
                        rhs += mu * kernel.entry(u, y) @ (Z.L[wu] @ x[ev])
                    vals.extend(lhs - rhs)
    return np.array(vals)


def in_dimension_oracle(cat, Z, Zp, tol=1e-10):
    """Dimension of the admissible-kernel space by dense brute force: stack the
    violation vectors of every raw basis kernel and rank-test the linear map."""
    layout = cq.KernelLayout(Z, Zp)
    cols = []
    for idx in range(layout.size):
        vec = np.zeros(layout.size)
        vec[idx] = 1.0
        cols.append(in_violation_vector(cat, Z, Zp, layout.to_kernel(vec, "unconstrained")))
    V = np.stack(cols, axis=1)
    if not np.any(V):
        return layout.size
    s = np.linalg.svd(V, compute_uv=False)
    rank = int((s > tol * s[0]).sum())
    return layout.size - rank


def brute_force_rooted_isomorphisms(p1, p2):
    """Exhaustive permutation filter over all root/dim-respecting bijections."""
    import itertools

    if len(p1.vertices) != len(p2.vertices):
        return []
    others1 = [v for v in p1.vertices if v != p1.root]
    others2 = [v for v in p2.vertices if v != p2.root]
    if p1.dims[p1.root] != p2.dims[p2.root]:
        return []
    out = []
    for perm in itertools.permutations(others2):
        mapping = {p1.root: p2.root}
        mapping.update(zip(others1, perm))
        if any(p1.dims[v] != p2.dims[w] for v, w in mapping.items()):
            continue
        ok = all(
            ((v1, v2) in p1.order) == ((mapping[v1], mapping[v2]) in p2.order)
            for v1 in p1.vertices
            for v2 in p1.vertices
        )
        if ok:
            out.append(mapping)
    out.sort(key=lambda m: tuple(sorted(m.items())))
    return out


def random_poset(n_elements: int, seed: int):
    """Random poset on <= n elements: random edges respecting a random linear order."""
    rng = np.random.default_rng(seed)
    names = [f"p{i}" for i in range(n_elements)]
    order = rng.permutation(n_elements)
    rels = []
    for i in range(n_elements):
        for j in range(i + 1, n_elements):
            if rng.random() < 0.45:
                rels.append((names[order[i]], names[order[j]]))
    return cq.build_poset_category(names, rels)
