"""Constructors for the standard specializations.

Finite groups as one-object categories, action groupoids, thin poset/lattice
categories, face categories of finite regular CW complexes (graphs are the
1-dimensional case), and neighbourhood groupoids whose arrows are rooted
k-ball isomorphisms between cells.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .category import FiniteCategory
from .errors import BuilderError
from .functors import FeatureFunctor


# ---------------------------------------------------------------------------
# groups

def _group_inverses(elements, mult, identity):
    inv = {}
    for g in elements:
        for h in elements:
            if mult[(g, h)] == identity and mult[(h, g)] == identity:
                inv[g] = h
                break
        else:
            raise BuilderError(f"group element {g} has no inverse")
    return inv


def _validate_group(elements, mult):
    eset = set(elements)
    for g in elements:
        for h in elements:
            if (g, h) not in mult or mult[(g, h)] not in eset:
                raise BuilderError(f"multiplication not closed at ({g},{h})")
    identity = None
    for e in elements:
        if all(mult[(e, g)] == g and mult[(g, e)] == g for g in elements):
            identity = e
            break
    if identity is None:
        raise BuilderError("no identity element in multiplication table")
    for g in elements:
        for h in elements:
            for k in elements:
                if mult[(mult[(g, h)], k)] != mult[(g, mult[(h, k)])]:
                    raise BuilderError(f"multiplication not associative at ({g},{h},{k})")
    inv = _group_inverses(elements, mult, identity)
    return identity, inv


def _validate_action(elements, mult, identity, omega, action):
    for y in omega:
        if action[(identity, y)] != y:
            raise BuilderError(f"action of identity moves {y}")
    for g in elements:
        for h in elements:
            for y in omega:
                if action[(g, action[(h, y)])] != action[(mult[(g, h)], y)]:
                    raise BuilderError(f"not a left action at ({g},{h},{y})")


def _validate_representation(elements, mult, identity, rho, label):
    dim = np.asarray(rho[identity]).shape[0]
    if np.abs(np.asarray(rho[identity]) - np.eye(dim)).max() > 1e-12:
        raise BuilderError(f"{label}(identity) is not the identity matrix")
    for g in elements:
        for h in elements:
            res = np.abs(
                np.asarray(rho[mult[(g, h)]]) - np.asarray(rho[g]) @ np.asarray(rho[h])
            ).max()
            if res > 1e-12:
                raise BuilderError(f"{label} is not a homomorphism at ({g},{h}): residual {res:.3g}")


def build_group_category(
    elements: list[str],
    mult: dict[tuple[str, str], str],
    omega: list[str] | None = None,
    action: dict[tuple[str, str], str] | None = None,
    rho_X: dict[str, np.ndarray] | None = None,
    rho_Y: dict[str, np.ndarray] | None = None,
) -> tuple[FiniteCategory, FeatureFunctor, FeatureFunctor]:
    """One-object category of a finite group, with its feature functors.

    Base transports are the action (``tau_g = g^{-1}·``, ``pi_g = g·``) and
    fiber transports the representations at inverse elements.  Defaults:
    one-point base with trivial action, trivial 1-dim representations.
    """
    identity, inv = _validate_group(elements, mult)
    if omega is None:
        omega = ["*"]
        action = {(g, "*"): "*" for g in elements}
    if action is None:
        raise BuilderError("an action must accompany a nontrivial base")
    _validate_action(elements, mult, identity, omega, action)
    if rho_X is None:
        rho_X = {g: np.eye(1) for g in elements}
    if rho_Y is None:
        rho_Y = {g: np.eye(1) for g in elements}
    _validate_representation(elements, mult, identity, rho_X, "rho_X")
    _validate_representation(elements, mult, identity, rho_Y, "rho_Y")

    star = "*"
    arrows = [(g, star, star) for g in elements]
    composition = {(f, g): mult[(f, g)] for f in elements for g in elements}
    cat = FiniteCategory([star], arrows, {star: identity}, composition,
                         meta={"kind": "group", "inverses": inv})

    def functor(rho, name):
        return FeatureFunctor(
            cat,
            base={star: list(omega)},
            fiber_dim={star: np.asarray(rho[identity]).shape[0]},
            tau={g: {y: action[(inv[g], y)] for y in omega} for g in elements},
            pi={g: {y: action[(g, y)] for y in omega} for g in elements},
            L={g: np.asarray(rho[inv[g]], dtype=float) for g in elements},
            name=name,
        )

    return cat, functor(rho_X, "X"), functor(rho_Y, "Y")


def build_action_groupoid(
    elements: list[str],
    mult: dict[tuple[str, str], str],
    omega: list[str],
    action: dict[tuple[str, str], str],
) -> FiniteCategory:
    """Action groupoid: objects are base points, arrows are (g, y): y -> g·y."""
    identity, inv = _validate_group(elements, mult)
    _validate_action(elements, mult, identity, omega, action)
    arrow_id = {(g, y): f"({g},{y})" for g in elements for y in omega}
    arrows = [(arrow_id[(g, y)], y, action[(g, y)]) for g in elements for y in omega]
    identities = {y: arrow_id[(identity, y)] for y in omega}
    composition = {}
    for g in elements:
        for y in omega:
            for h in elements:
                # (h, g·y) ∘ (g, y) = (hg, y)
                composition[(arrow_id[(h, action[(g, y)])], arrow_id[(g, y)])] = arrow_id[
                    (mult[(h, g)], y)
                ]
    return FiniteCategory(list(omega), arrows, identities, composition,
                          meta={"kind": "action_groupoid"})


# common small groups, handy for tests and demos ----------------------------

def cyclic_group(n: int) -> tuple[list[str], dict]:
    elements = [f"g{k}" if k else "e" for k in range(n)]
    mult = {
        (elements[i], elements[j]): elements[(i + j) % n]
        for i in range(n)
        for j in range(n)
    }
    return elements, mult


def symmetric_group_3() -> tuple[list[str], dict]:
    perms = list(itertools.permutations((0, 1, 2)))
    names = {p: "e" if p == (0, 1, 2) else "s" + "".join(str(i) for i in p) for p in perms}
    mult = {}
    for p in perms:
        for q in perms:
            comp = tuple(p[q[i]] for i in range(3))
            mult[(names[p], names[q])] = names[comp]
    return [names[p] for p in perms], mult


def regular_representation(elements: list[str], mult: dict) -> dict[str, np.ndarray]:
    index = {g: i for i, g in enumerate(elements)}
    rho = {}
    for g in elements:
        mat = np.zeros((len(elements), len(elements)))
        for h in elements:
            mat[index[mult[(g, h)]], index[h]] = 1.0
        rho[g] = mat
    return rho


# ---------------------------------------------------------------------------
# posets

def build_poset_category(
    elements: list[str], relations: list[tuple[str, str]]
) -> FiniteCategory:
    """Thin category of the reflexive-transitive closure of a relation.

    Raises with a named cycle when the closure is not antisymmetric.
    """
    elems = list(elements)
    eset = set(elems)
    for d, a in relations:
        if d not in eset or a not in eset:
            raise BuilderError(f"relation ({d},{a}) references unknown element")
    leq = {(e, e) for e in elems} | set(relations)
    changed = True
    while changed:
        changed = False
        for d, m in list(leq):
            for m2, a in list(leq):
                if m == m2 and (d, a) not in leq:
                    leq.add((d, a))
                    changed = True
    for d, a in leq:
        if d != a and (a, d) in leq:
            raise BuilderError(f"cycle detected: {d} <= {a} and {a} <= {d}")

    arrow_id = {(d, a): f"{d}->{a}" for (d, a) in leq}
    arrows = [(arrow_id[(d, a)], d, a) for (d, a) in sorted(leq)]
    identities = {e: arrow_id[(e, e)] for e in elems}
    composition = {}
    for (b, a) in leq:
        for (c, b2) in leq:
            if b2 == b:
                composition[(arrow_id[(b, a)], arrow_id[(c, b)])] = arrow_id[(c, a)]
    return FiniteCategory(elems, arrows, identities, composition, meta={"kind": "poset"})


def identity_functor(
    cat: FiniteCategory, fiber_dim: int | dict[str, int] = 1,
    base: dict[str, list[str]] | None = None, name: str = "id-functor",
) -> FeatureFunctor:
    """Functor with identity transports everywhere (requires a constant fiber dim
    across each connected pair; single-point base by default)."""
    if base is None:
        base = {a: ["*"] for a in cat.objects}
    dims = {a: fiber_dim for a in cat.objects} if isinstance(fiber_dim, int) else dict(fiber_dim)
    tau, pi, L = {}, {}, {}
    for u in cat.arrow_order:
        d, a = cat.src(u), cat.tgt(u)
        if dims[d] != dims[a] or base[d] != base[a]:
            raise BuilderError(f"identity transports untypable on arrow {u}")
        tau[u] = {p: p for p in base[a]}
        pi[u] = {p: p for p in base[d]}
        L[u] = np.eye(dims[a])
    return FeatureFunctor(cat, base, dims, tau, pi, L, name=name)


# ---------------------------------------------------------------------------
# CW complexes and face categories

@dataclass
class CWComplex:
    """Finite regular CW complex given by cells with dimensions and the
    covering face relation (sigma is a face of tau, one dimension apart or
    more; dim must strictly increase along each pair)."""

    cells: list[tuple[str, int]]
    faces: list[tuple[str, str]]

    def __post_init__(self):
        self.dim = dict(self.cells)
        if len(self.dim) != len(self.cells):
            raise BuilderError("duplicate cell ids")
        for s, t in self.faces:
            if s not in self.dim or t not in self.dim:
                raise BuilderError(f"face pair ({s},{t}) references unknown cell")
            if self.dim[s] >= self.dim[t]:
                raise BuilderError(f"face pair ({s},{t}) does not increase dimension")
        # regularity proxy for the graph case
        if self.dim and max(self.dim.values()) <= 1:
            for c, d in self.cells:
                if d == 1:
                    ends = [s for s, t in self.faces if t == c]
                    if len(ends) != 2:
                        raise BuilderError(f"1-cell {c} has {len(ends)} endpoints, expected 2")

    def cell_ids(self) -> list[str]:
        return [c for c, _ in self.cells]


def graph_complex(vertices: list[str], edges: list[tuple[str, str, str]]) -> CWComplex:
    """Convenience: a finite undirected graph as a 1-complex.

    ``edges`` are (edge_id, endpoint, endpoint) triples.
    """
    cells = [(v, 0) for v in vertices] + [(e, 1) for e, _, _ in edges]
    faces = [(v, e) for e, v1, v2 in edges for v in (v1, v2)]
    return CWComplex(cells, faces)


BOTTOM = "0hat"


def build_face_category(cx: CWComplex, include_bottom: bool = True) -> FiniteCategory:
    """Thin category of the face poset, optionally with a bottom object below
    every cell (usable as a global channel)."""
    elements = [c for c, _ in cx.cells]
    relations = list(cx.faces)
    if include_bottom:
        if BOTTOM in elements:
            raise BuilderError(f"cell id {BOTTOM!r} collides with the bottom object")
        elements = [BOTTOM] + elements
        relations += [(BOTTOM, c) for c, _ in cx.cells]
    cat = build_poset_category(elements, relations)
    cat.meta["kind"] = "face_category"
    return cat


# ---------------------------------------------------------------------------
# rooted patches and neighbourhood groupoids

@dataclass
class RootedPatch:
    """The full induced subposet on the Hasse ball of radius k around a root.

    ``order`` is the global comparability relation restricted to the patch
    (a rooted isomorphism must preserve it in both directions, along with
    cell dimensions and the root); ``covers`` is the induced covering
    relation, kept for degree-signature pruning.
    """

    root: str
    vertices: tuple[str, ...]
    dims: dict[str, int]
    covers: frozenset[tuple[str, str]]
    order: frozenset[tuple[str, str]]
    dist: dict[str, int] = field(default_factory=dict)


def _hasse_neighbours(cx: CWComplex) -> dict[str, set[str]]:
    nbrs: dict[str, set[str]] = {c: set() for c in cx.cell_ids()}
    for s, t in cx.faces:
        nbrs[s].add(t)
        nbrs[t].add(s)
    return nbrs


def _global_order(cx: CWComplex) -> set[tuple[str, str]]:
    leq = {(c, c) for c in cx.cell_ids()} | set(cx.faces)
    changed = True
    while changed:
        changed = False
        for d, m in list(leq):
            for m2, a in list(leq):
                if m == m2 and (d, a) not in leq:
                    leq.add((d, a))
                    changed = True
    return leq


def rooted_patch(cx: CWComplex, root: str, k: int) -> RootedPatch:
    """Cells within undirected Hasse distance <= k of the root, with induced structure."""
    if root not in cx.dim:
        raise BuilderError(f"unknown root cell {root}")
    nbrs = _hasse_neighbours(cx)
    dist = {root: 0}
    frontier = [root]
    while frontier:
        nxt = []
        for c in frontier:
            if dist[c] == k:
                continue
            for n in sorted(nbrs[c]):
                if n not in dist:
                    dist[n] = dist[c] + 1
                    nxt.append(n)
        frontier = nxt
    verts = tuple(sorted(dist))
    vset = set(verts)
    covers = frozenset((s, t) for s, t in cx.faces if s in vset and t in vset)
    order = frozenset((d, a) for d, a in _global_order(cx) if d in vset and a in vset)
    return RootedPatch(root, verts, {v: cx.dim[v] for v in verts}, covers, order, dist)


def _signature(p: RootedPatch, v: str) -> tuple:
    up = sum(1 for s, t in p.covers if s == v)
    down = sum(1 for s, t in p.covers if t == v)
    return (p.dist.get(v, -1), p.dims[v], up, down)


def enumerate_rooted_isomorphisms(p1: RootedPatch, p2: RootedPatch) -> list[dict[str, str]]:
    """All bijections between patches preserving root, dims, and induced order.

    Backtracking over candidates pruned by (distance, dimension, up-degree,
    down-degree) signatures; correctness comes from the exhaustive search,
    pruning is only a speedup.  Deterministic order of results.
    """
    if len(p1.vertices) != len(p2.vertices):
        return []
    sig2: dict[tuple, list[str]] = {}
    for v in p2.vertices:
        sig2.setdefault(_signature(p2, v), []).append(v)
    for lst in sig2.values():
        lst.sort()

    # match vertices in order of scarcity of candidates, root first
    order1 = sorted(p1.vertices, key=lambda v: (v != p1.root, len(sig2.get(_signature(p1, v), [])), v))
    if order1 and order1[0] != p1.root:
        return []

    results: list[dict[str, str]] = []
    assigned: dict[str, str] = {}
    used: set[str] = set()
    o1 = p1.order
    o2 = p2.order

    def consistent(v: str, w: str) -> bool:
        for v0, w0 in assigned.items():
            if ((v, v0) in o1) != ((w, w0) in o2):
                return False
            if ((v0, v) in o1) != ((w0, w) in o2):
                return False
        return True

    def backtrack(idx: int) -> None:
        if idx == len(order1):
            results.append(dict(assigned))
            return
        v = order1[idx]
        cands = [p2.root] if v == p1.root else sig2.get(_signature(p1, v), [])
        for w in cands:
            if w in used or (v == p1.root and _signature(p1, v) != _signature(p2, w)):
                continue
            if not consistent(v, w):
                continue
            assigned[v] = w
            used.add(w)
            backtrack(idx + 1)
            del assigned[v]
            used.discard(w)

    backtrack(0)
    results.sort(key=lambda m: tuple(sorted(m.items())))
    return results


def build_neighbourhood_groupoid(cx: CWComplex, k: int) -> FiniteCategory:
    """Groupoid whose arrows are rooted k-ball isomorphisms between cells.

    Arrow direction follows the contravariant convention: an arrow tau -> sigma
    carries an isomorphism from the sigma-ball onto the tau-ball (this is easy
    to invert by mistake; compositions below compose the carried bijections in
    the reversed order).  The carried bijections are stored in ``meta``.
    """
    if k < 0:
        raise BuilderError("k must be nonnegative")
    cells = cx.cell_ids()
    patches = {c: rooted_patch(cx, c, k) for c in cells}

    arrow_maps: dict[str, dict[str, str]] = {}
    arrows = []
    by_pair: dict[tuple[str, str], list[str]] = {}
    lookup: dict[tuple[str, str, frozenset], str] = {}
    for tau in cells:
        for sigma in cells:
            isos = enumerate_rooted_isomorphisms(patches[sigma], patches[tau])
            ids = []
            for i, phi in enumerate(isos):
                aid = f"{tau}>{sigma}#{i}"
                arrows.append((aid, tau, sigma))
                arrow_maps[aid] = phi  # ball(sigma) -> ball(tau)
                lookup[(tau, sigma, frozenset(phi.items()))] = aid
                ids.append(aid)
            by_pair[(tau, sigma)] = ids

    identities = {}
    for c in cells:
        ident = {v: v for v in patches[c].vertices}
        identities[c] = lookup[(c, c, frozenset(ident.items()))]

    composition = {}
    for f, tau_f, sigma_f in arrows:  # f: tau_f -> sigma_f
        for g, tau_g, sigma_g in arrows:  # g: tau_g -> sigma_g
            if tau_f != sigma_g:
                continue
            phi = {v: arrow_maps[g][arrow_maps[f][v]] for v in arrow_maps[f]}
            composition[(f, g)] = lookup[(tau_g, sigma_f, frozenset(phi.items()))]

    cat = FiniteCategory(
        cells, arrows, identities, composition,
        meta={"kind": "neighbourhood_groupoid", "k": k,
              "arrow_maps": arrow_maps, "patches": patches},
    )
    return cat


def build_neighbourhood_functors(
    cx: CWComplex, k: int, groupoid: FiniteCategory, d_X: int, d_Y: int
) -> tuple[FeatureFunctor, FeatureFunctor]:
    """Patch-stacking functors over the neighbourhood groupoid (uniform stalks).

    The source fiber at a root stacks one d_X-dim stalk per patch cell in
    (dimension, cell id) order; arrows act by coordinate permutation through
    the inverse of the carried bijection.  The target fiber is a fixed
    d_Y-dim space with identity transports.
    """
    patches = groupoid.meta.get("patches") or {c: rooted_patch(cx, c, k) for c in groupoid.objects}
    arrow_maps = groupoid.meta.get("arrow_maps")
    if arrow_maps is None:
        raise BuilderError("groupoid lacks arrow bijections; build it with build_neighbourhood_groupoid")

    coords = {
        c: sorted(patches[c].vertices, key=lambda v: (patches[c].dims[v], v))
        for c in groupoid.objects
    }
    pos = {c: {v: i for i, v in enumerate(coords[c])} for c in groupoid.objects}
    base = {c: ["*"] for c in groupoid.objects}
    point_maps = {u: {"*": "*"} for u in groupoid.arrow_order}

    LX = {}
    LY = {}
    for u in groupoid.arrow_order:
        tau_o, sigma_o = groupoid.src(u), groupoid.tgt(u)
        phi = arrow_maps[u]  # ball(sigma) -> ball(tau)
        inv = {w: v for v, w in phi.items()}
        nt, ns = len(coords[tau_o]), len(coords[sigma_o])
        mat = np.zeros((nt * d_X, ns * d_X))
        for rho in coords[tau_o]:
            r = pos[tau_o][rho]
            s = pos[sigma_o][inv[rho]]
            mat[r * d_X : (r + 1) * d_X, s * d_X : (s + 1) * d_X] = np.eye(d_X)
        LX[u] = mat
        LY[u] = np.eye(d_Y)

    X_k = FeatureFunctor(
        groupoid, base,
        {c: len(coords[c]) * d_X for c in groupoid.objects},
        point_maps, point_maps, LX, name=f"patch-stack(k={k},d={d_X})",
    )
    Y_k = FeatureFunctor(
        groupoid, base, {c: d_Y for c in groupoid.objects},
        point_maps, point_maps, LY, name=f"root-stalk(d={d_Y})",
    )
    return X_k, Y_k
