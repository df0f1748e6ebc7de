"""Category kernels and naturality constraints as linear systems.

A kernel assigns each (incoming arrow, base point) pair a matrix mixing
source-object fibers into target-object fibers.  Every naturality regime in
the layer calculus is linear in the kernel entries, so admissible kernels are
parameterized by the nullspace of an assembled constraint matrix:

* ``IN``        — integrated naturality of the category convolution, with the
                  universal quantifier over inputs discharged on the standard
                  basis of the finite-dimensional section space;
* ``IN_bundle`` — the arrow-bundle variant, quantified over independent
                  per-arrow basis inputs, evaluated through tau;
* ``IN_probe``  — same as IN_bundle but evaluated through a probe family.

Natural biases, natural linear families (including scalar channels), and the
pointwise steerability law of one-object group categories get the same
treatment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .category import FiniteCategory
from .errors import KernelError
from .functors import FeatureFunctor, ProbeFamily, scalar_stack, transport_operator

RANK_TOL = 1e-10  # relative; constraint entries are small integer-like transports
RESIDUAL_TOL = 1e-9

REGIMES = ("IN", "IN_bundle", "IN_probe", "pointwise_steerable", "unconstrained")


@dataclass
class CategoryKernel:
    """Per-(arrow, base point) matrix family with optional natural bias.

    ``entries[(u, y)]`` has shape ``(n_target(tgt u), n_source(src u))``; the
    convolution it induces maps sections of ``source`` to sections of
    ``target``.  ``regime`` records which naturality condition the kernel was
    built to satisfy; it is metadata, not enforced at evaluation time.
    """

    source: FeatureFunctor
    target: FeatureFunctor
    entries: dict[tuple[str, str], np.ndarray]
    bias: dict[str, np.ndarray] | None = None
    regime: str = "unconstrained"
    name: str = ""

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise KernelError(f"unknown regime {self.regime!r}")
        self.entries = {k: np.asarray(v, dtype=float) for k, v in self.entries.items()}
        if self.bias is not None:
            self.bias = {a: np.asarray(v, dtype=float) for a, v in self.bias.items()}
        for (u, y), mat in self.entries.items():
            a, b = self.source.cat.tgt(u), self.source.cat.src(u)
            want = (self.target.fiber_dim[a], self.source.fiber_dim[b])
            if mat.shape != want:
                raise KernelError(f"entry ({u},{y}) has shape {mat.shape}, expected {want}")

    @property
    def cat(self) -> FiniteCategory:
        return self.source.cat

    def entry(self, u: str, y: str) -> np.ndarray:
        """Entry at (arrow, point); missing entries read as zero."""
        mat = self.entries.get((u, y))
        if mat is not None:
            return mat
        a, b = self.cat.tgt(u), self.cat.src(u)
        return np.zeros((self.target.fiber_dim[a], self.source.fiber_dim[b]))

    def bias_at(self, a: str) -> np.ndarray:
        if self.bias is not None and a in self.bias:
            return self.bias[a]
        return np.zeros((self.target.n_points(a), self.target.fiber_dim[a]))

    def scaled(self, c: float) -> "CategoryKernel":
        return CategoryKernel(
            self.source, self.target,
            {k: c * v for k, v in self.entries.items()},
            None if self.bias is None else {a: c * v for a, v in self.bias.items()},
            self.regime, self.name,
        )


class KernelLayout:
    """Flat index over all scalar kernel unknowns, in canonical order.

    Order: arrows by id, then base points of the arrow's target in base
    order, then the entry matrix row-major.
    """

    def __init__(self, source: FeatureFunctor, target: FeatureFunctor):
        self.source, self.target = source, target
        cat = source.cat
        self.blocks: dict[tuple[str, str], tuple[int, int, int]] = {}
        ofs = 0
        for u in cat.arrow_order:
            a, b = cat.tgt(u), cat.src(u)
            rows, cols = target.fiber_dim[a], source.fiber_dim[b]
            for y in target.points(a):
                self.blocks[(u, y)] = (ofs, rows, cols)
                ofs += rows * cols
        self.size = ofs

    def index(self, u: str, y: str, i: int, j: int) -> int:
        ofs, rows, cols = self.blocks[(u, y)]
        return ofs + i * cols + j

    def to_kernel(self, vec: np.ndarray, regime: str, name: str = "") -> CategoryKernel:
        entries = {}
        for (u, y), (ofs, rows, cols) in self.blocks.items():
            entries[(u, y)] = vec[ofs : ofs + rows * cols].reshape(rows, cols)
        return CategoryKernel(self.source, self.target, entries, None, regime, name)

    def to_vector(self, kernel: CategoryKernel) -> np.ndarray:
        vec = np.zeros(self.size)
        for (u, y), (ofs, rows, cols) in self.blocks.items():
            vec[ofs : ofs + rows * cols] = kernel.entry(u, y).ravel()
        return vec


@dataclass
class ConstraintSystem:
    """Rows of scalar linear equations in the kernel unknowns.

    Each row cites the tuple that generated it, so the system is reproducible
    from the category and functors alone; identical inputs produce
    bit-identical row ordering.
    """

    layout: KernelLayout
    matrix: np.ndarray
    row_provenance: list[tuple] = field(default_factory=list)
    kind: str = "IN"

    def residual(self, kernel: CategoryKernel) -> float:
        if self.matrix.shape[0] == 0:
            return 0.0
        return float(np.abs(self.matrix @ self.layout.to_vector(kernel)).max())


def _check_probe(sigma: ProbeFamily | None, kind: str) -> None:
    if kind == "IN_probe" and sigma is None:
        raise KernelError("IN_probe assembly requires a probe family")


def assemble_in_constraints(
    cat: FiniteCategory,
    Z: FeatureFunctor,
    Zp: FeatureFunctor,
    kind: str = "IN",
    sigma: ProbeFamily | None = None,
) -> ConstraintSystem:
    """Assemble the integrated-naturality equations as rows linear in K.

    For each arrow ``w: a -> c`` and base point ``y`` of ``a``, the two sides
    of the naturality identity are expanded on basis inputs: basis sections of
    the section space at ``c`` (kind ``IN``) or independent basis inputs per
    incoming arrow of ``c`` (kinds ``IN_bundle`` / ``IN_probe``).  Each output
    coordinate contributes one scalar row.
    """
    if kind not in ("IN", "IN_bundle", "IN_probe"):
        raise KernelError(f"unknown constraint kind {kind!r}")
    _check_probe(sigma, kind)
    layout = KernelLayout(Z, Zp)
    rows: list[np.ndarray] = []
    prov: list[tuple] = []

    for w in cat.arrow_order:
        a, c = cat.src(w), cat.tgt(w)
        Lw = Zp.L[w]
        for y_idx, y in enumerate(Zp.points(a)):
            pw_y_idx = Zp.pi_index(w, y_idx)
            pw_y = Zp.points(c)[pw_y_idx]
            if kind == "IN":
                _in_rows(cat, Z, Zp, layout, rows, prov, w, a, c, Lw, y, y_idx, pw_y, pw_y_idx)
            else:
                _bundle_rows(cat, Z, Zp, layout, rows, prov, w, a, c, Lw, y, y_idx, pw_y, pw_y_idx,
                             sigma if kind == "IN_probe" else None, kind)

    matrix = np.array(rows) if rows else np.zeros((0, layout.size))
    return ConstraintSystem(layout, matrix, prov, kind)


def _in_rows(cat, Z, Zp, layout, rows, prov, w, a, c, Lw, y, y_idx, pw_y, pw_y_idx):
    na_out = Zp.fiber_dim[a]
    # basis sections at c: indicator at point p, fiber coordinate j
    for p_idx, p in enumerate(Z.points(c)):
        for j in range(Z.fiber_dim[c]):
            for i in range(na_out):
                row = np.zeros(layout.size)
                # left side: convolution at c, transported through w
                for up in cat.incoming_arrows(c):
                    mu = cat.weight[up]
                    if mu == 0.0:
                        continue
                    ev = Z.pi_index(up, Z.tau_index(up, pw_y_idx))
                    if ev != p_idx:
                        continue
                    Lup = Z.L[up]
                    rows_up = Zp.fiber_dim[c]
                    for m in range(rows_up):
                        coef = mu * Lw[i, m]
                        if coef == 0.0:
                            continue
                        for n in range(Z.fiber_dim[cat.src(up)]):
                            if Lup[n, j] != 0.0:
                                row[layout.index(up, pw_y, m, n)] += coef * Lup[n, j]
                # right side: convolution at a applied to the transported input
                for u in cat.incoming_arrows(a):
                    mu = cat.weight[u]
                    if mu == 0.0:
                        continue
                    wu = cat.compose(w, u)
                    ev = Z.pi_index(wu, Z.tau_index(u, y_idx))
                    if ev != p_idx:
                        continue
                    Lwu = Z.L[wu]
                    for n in range(Z.fiber_dim[cat.src(u)]):
                        if Lwu[n, j] != 0.0:
                            row[layout.index(u, y, i, n)] -= mu * Lwu[n, j]
                rows.append(row)
                prov.append(("IN", w, y, ("section_basis", p, j), i))


def _bundle_rows(cat, Z, Zp, layout, rows, prov, w, a, c, Lw, y, y_idx, pw_y, pw_y_idx, sigma, kind):
    na_out = Zp.fiber_dim[a]
    post = {u: cat.compose(w, u) for u in cat.incoming_arrows(a)}
    for u0 in cat.incoming_arrows(c):
        b0 = cat.src(u0)
        if sigma is None:
            ev_left = Z.tau_index(u0, pw_y_idx)
        else:
            ev_left = sigma.index(Z, u0, pw_y_idx)
        for p_idx, p in enumerate(Z.points(b0)):
            for j in range(Z.fiber_dim[b0]):
                for i in range(na_out):
                    row = np.zeros(layout.size)
                    mu0 = cat.weight[u0]
                    if mu0 != 0.0 and ev_left == p_idx:
                        for m in range(Zp.fiber_dim[c]):
                            if Lw[i, m] != 0.0:
                                row[layout.index(u0, pw_y, m, j)] += mu0 * Lw[i, m]
                    for u in cat.incoming_arrows(a):
                        if post[u] != u0 or cat.weight[u] == 0.0:
                            continue
                        if sigma is None:
                            ev = Z.tau_index(u, y_idx)
                        else:
                            ev = sigma.index(Z, u, y_idx)
                        if ev == p_idx:
                            row[layout.index(u, y, i, j)] -= cat.weight[u]
                    rows.append(row)
                    prov.append((kind, w, y, ("bundle_basis", u0, p, j), i))


def nullspace_basis(matrix: np.ndarray, n_unknowns: int, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal nullspace basis columns via rank-revealing SVD.

    Singular values below ``tol * s_max`` count as zero.  An empty or all-zero
    system returns the identity basis.
    """
    if n_unknowns == 0:
        raise KernelError("empty unknown set")
    if matrix.shape[0] == 0 or not np.any(matrix):
        return np.eye(n_unknowns)
    return null_space(matrix, rcond=tol)


def solve_parameter_space(
    system: ConstraintSystem, tol: float = RANK_TOL, name: str = ""
) -> list[CategoryKernel]:
    """Orthonormal basis of admissible kernels for the assembled regime."""
    basis = nullspace_basis(system.matrix, system.layout.size, tol)
    return [
        system.layout.to_kernel(basis[:, k], system.kind, name=f"{name}[{k}]")
        for k in range(basis.shape[1])
    ]


def solve_natural_bias(cat: FiniteCategory, Zp: FeatureFunctor) -> list[dict[str, np.ndarray]]:
    """Basis of bias fields with ``Zp(w) b_c == b_a`` along every arrow."""
    offsets, size = {}, 0
    for a in cat.objects:
        offsets[a] = size
        size += Zp.dim(a)
    rows = []
    for w in cat.arrow_order:
        a, c = cat.src(w), cat.tgt(w)
        op = transport_operator(Zp, w)  # flat(c) -> flat(a)
        for r in range(Zp.dim(a)):
            row = np.zeros(size)
            row[offsets[c] : offsets[c] + Zp.dim(c)] += op[r]
            row[offsets[a] + r] -= 1.0
            rows.append(row)
    basis = nullspace_basis(np.array(rows) if rows else np.zeros((0, size)), size)
    out = []
    for k in range(basis.shape[1]):
        vec = basis[:, k]
        out.append({
            a: vec[offsets[a] : offsets[a] + Zp.dim(a)].reshape(Zp.n_points(a), Zp.fiber_dim[a])
            for a in cat.objects
        })
    return out


def solve_natural_linear_family(
    cat: FiniteCategory, Z: FeatureFunctor, Zp: FeatureFunctor
) -> list[dict[str, np.ndarray]]:
    """Basis of per-object matrices ``T_a: flat Z(a) -> flat Zp(a)`` natural in a.

    Naturality means ``Zp(u) T_a = T_b Z(u)`` for every arrow ``u: b -> a``;
    this is the intertwining law shared by poset incidence operators,
    steerable local kernels on neighbourhood groupoids, and (with scalar
    target) gate channels.
    """
    shapes = {a: (Zp.dim(a), Z.dim(a)) for a in cat.objects}
    offsets, size = {}, 0
    for a in cat.objects:
        offsets[a] = size
        size += shapes[a][0] * shapes[a][1]

    def idx(a, r, ccol):
        return offsets[a] + r * shapes[a][1] + ccol

    rows = []
    for u in cat.arrow_order:
        b, a = cat.src(u), cat.tgt(u)
        P = transport_operator(Zp, u)  # flat Zp(a) -> flat Zp(b)
        Q = transport_operator(Z, u)   # flat Z(a) -> flat Z(b)
        for r in range(Zp.dim(b)):
            for ccol in range(Z.dim(a)):
                row = np.zeros(size)
                for m in range(Zp.dim(a)):
                    if P[r, m] != 0.0:
                        row[idx(a, m, ccol)] += P[r, m]
                for n in range(Z.dim(b)):
                    if Q[n, ccol] != 0.0:
                        row[idx(b, r, n)] -= Q[n, ccol]
                rows.append(row)
    basis = nullspace_basis(np.array(rows) if rows else np.zeros((0, size)), size)
    out = []
    for k in range(basis.shape[1]):
        vec = basis[:, k]
        out.append({
            a: vec[offsets[a] : offsets[a] + shapes[a][0] * shapes[a][1]].reshape(shapes[a])
            for a in cat.objects
        })
    return out


@dataclass
class ScalarChannel:
    """A natural linear scalar channel: per-object matrices flat Z(a) -> Omega(a)-fields."""

    functor: FeatureFunctor
    matrices: dict[str, np.ndarray]

    def apply(self, a: str, arr: np.ndarray) -> np.ndarray:
        return self.matrices[a] @ arr.ravel()


def solve_scalar_channels(cat: FiniteCategory, Z: FeatureFunctor) -> list[ScalarChannel]:
    """Basis of natural linear scalar channels on Z (channels into the scalar functor)."""
    S = scalar_stack(Z, 1, name="S")
    fams = solve_natural_linear_family(cat, Z, S)
    return [ScalarChannel(Z, fam) for fam in fams]


def _require_one_object_groupoid(cat: FiniteCategory) -> str:
    if len(cat.objects) != 1:
        raise KernelError("pointwise steerability needs a one-object group category")
    for u in cat.arrow_order:
        if cat.inverse(u) is None:
            raise KernelError(f"arrow {u} has no inverse; not a group category")
    return cat.objects[0]


def check_pointwise_steerability(cat: FiniteCategory, kernel: CategoryKernel) -> float:
    """Max residual of the steerability law on a one-object group category.

    The law transports the kernel along every group element h:
    ``L'_h K(h∘g, pi_h(y)) == K(g, y)`` (the target functor's transport at h
    is the representation evaluated at the inverse element).
    """
    _require_one_object_groupoid(cat)
    Zp = kernel.target
    worst = 0.0
    for h in cat.arrow_order:
        Lh = Zp.L[h]
        for g in cat.arrow_order:
            hg = cat.compose(h, g)
            for y_idx, y in enumerate(Zp.points(cat.objects[0])):
                hy = Zp.points(cat.objects[0])[Zp.pi_index(h, y_idx)]
                res = float(np.linalg.norm(Lh @ kernel.entry(hg, hy) - kernel.entry(g, y), 2))
                worst = max(worst, res)
    return worst


def solve_steerable_space(
    cat: FiniteCategory, Z: FeatureFunctor, Zp: FeatureFunctor
) -> list[CategoryKernel]:
    """Basis of kernels satisfying the pointwise steerability law exactly."""
    _require_one_object_groupoid(cat)
    star = cat.objects[0]
    layout = KernelLayout(Z, Zp)
    rows = []
    for h in cat.arrow_order:
        Lh = Zp.L[h]
        for g in cat.arrow_order:
            hg = cat.compose(h, g)
            for y_idx, y in enumerate(Zp.points(star)):
                hy = Zp.points(star)[Zp.pi_index(h, y_idx)]
                for i in range(Zp.fiber_dim[star]):
                    for j in range(Z.fiber_dim[star]):
                        row = np.zeros(layout.size)
                        for m in range(Zp.fiber_dim[star]):
                            if Lh[i, m] != 0.0:
                                row[layout.index(hg, hy, m, j)] += Lh[i, m]
                        row[layout.index(g, y, i, j)] -= 1.0
                        rows.append(row)
    basis = nullspace_basis(np.array(rows), layout.size)
    return [
        layout.to_kernel(basis[:, k], "pointwise_steerable", name=f"steerable[{k}]")
        for k in range(basis.shape[1])
    ]


@dataclass
class L1Bound:
    """Per-arrow kernel norm table at an object, its weighted total, and the
    induced Lipschitz bound of the convolution (transport bound times total)."""

    object: str
    table: dict[str, float]
    total: float
    transport_bound: float
    lipschitz: float


def compute_l1_bound(kernel: CategoryKernel, a: str) -> L1Bound:
    cat = kernel.cat
    table = {}
    for u in cat.incoming_arrows(a):
        table[u] = max(
            (float(np.linalg.norm(kernel.entry(u, y), 2)) if kernel.entry(u, y).size else 0.0
             for y in kernel.target.points(a)),
            default=0.0,
        )
    total = sum(cat.weight[u] * g for u, g in table.items())
    h = kernel.source.transport_bound(a)
    return L1Bound(a, table, total, h, h * total)
