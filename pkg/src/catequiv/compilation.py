"""Retractions and equivariant compilation.

A retraction R is a bundle convolution that is a left inverse of the lift
(``R ∘ lift = id``) and itself natural.  Composing lift, any componentwise
objectwise family G, and R yields a map that is equivariant no matter what
G is; when G is already natural the composite reproduces G exactly.

Two constructions are provided:

* ``build_haar_retraction`` — groupoids: the kernel at an incoming arrow is
  the fiber transport of its inverse, averaged over incoming weight (the
  per-target normalization is folded into the kernel and the factor
  recorded);
* ``build_graded_target`` — thin categories: the target fibers are stacked
  per-lower-element summands and the kernel reinserts each arrow component
  into its own summand (block inclusions against block truncations).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .category import FiniteCategory
from .errors import CompileError
from .functors import FeatureFunctor, Section
from .kernels import CategoryKernel
from .layers import (
    BundleConvLayer,
    ComponentwiseLayer,
    LiftLayer,
    NetworkSpec,
    ObjectwiseMap,
    bundle_conv_forward,
    bundle_lift,
)

EXACT = 1e-12


@dataclass
class Retraction:
    """A bundle-convolution left inverse of the arrow-bundle lift."""

    kernel: CategoryKernel
    flavor: str  # "haar_groupoid" | "thin_graded"
    factors: dict[str, float] = field(default_factory=dict)
    graded: "GradedData | None" = None

    @property
    def target(self) -> FeatureFunctor:
        return self.kernel.target


@dataclass
class GradedData:
    """Lower-set splitting of a graded target: per-object summand dims,
    block inclusions E[d -> a] and block truncations L[d -> a]."""

    summand_dims: dict[str, int]
    blocks: dict[str, list[str]]  # object -> ordered lower-set elements
    inclusions: dict[tuple[str, str], np.ndarray]
    truncations: dict[tuple[str, str], np.ndarray]


def build_haar_retraction(cat: FiniteCategory, Y: FeatureFunctor) -> Retraction:
    """Averaging retraction on a groupoid.

    Kernel entry at ``u`` is ``L_{u^{-1}} / W`` with ``W`` the total incoming
    weight at the target, so the bundle convolution averages transported
    components back; on lifted bundles the transports cancel and the average
    collapses to the identity.
    """
    inverses = {}
    for u in cat.arrow_order:
        v = cat.inverse(u)
        if v is None:
            raise CompileError(f"arrow {u} has no two-sided inverse; not a groupoid")
        inverses[u] = v
    factors = {}
    entries = {}
    for a in cat.objects:
        w_total = cat.incoming_weight(a)
        if w_total <= 0.0:
            raise CompileError(f"object {a} has no incoming weight to average over")
        factors[a] = w_total
        for u in cat.incoming_arrows(a):
            mat = Y.L[inverses[u]] / w_total
            for y in Y.points(a):
                entries[(u, y)] = mat
    kernel = CategoryKernel(Y, Y, entries, None, regime="IN_bundle", name="haar-retraction")
    return Retraction(kernel, "haar_groupoid", factors)


def _is_thin(cat: FiniteCategory) -> bool:
    return all(len(cat.hom(b, a)) <= 1 for b in cat.objects for a in cat.objects)


def build_graded_target(
    cat: FiniteCategory, U_dims: dict[str, int], base: dict[str, list[str]] | None = None
) -> tuple[FeatureFunctor, Retraction]:
    """Lower-set graded target functor and its block retraction on a thin category.

    The fiber at ``a`` stacks one summand per element below ``a`` (canonical
    object order).  Zero-dimensional summands are allowed and simply dropped
    from the stacking.  The three block identities (naturality of truncations
    against inclusions, annihilation across incomparable elements, and the
    partition of identity) are verified exactly before returning.
    """
    if not _is_thin(cat):
        raise CompileError("graded target requires a thin category")
    below = {
        a: [e for e in cat.objects if cat.hom(e, a)] for a in cat.objects
    }
    dims = {a: sum(U_dims.get(e, 0) for e in below[a]) for a in cat.objects}
    offsets: dict[tuple[str, str], int] = {}
    for a in cat.objects:
        ofs = 0
        for e in below[a]:
            offsets[(a, e)] = ofs
            ofs += U_dims.get(e, 0)
    # zero totals are allowed (inert bottom objects contribute nothing to sums)

    def truncation(d: str, a: str) -> np.ndarray:
        out = np.zeros((dims[d], dims[a]))
        for e in below[d]:
            k = U_dims.get(e, 0)
            out[offsets[(d, e)] : offsets[(d, e)] + k,
                offsets[(a, e)] : offsets[(a, e)] + k] = np.eye(k)
        return out

    def inclusion(d: str, a: str) -> np.ndarray:
        out = np.zeros((dims[a], dims[d]))
        k = U_dims.get(d, 0)
        out[offsets[(a, d)] : offsets[(a, d)] + k,
            offsets[(d, d)] : offsets[(d, d)] + k] = np.eye(k)
        return out

    if base is None:
        base = {a: ["*"] for a in cat.objects}
    tau = {}
    pi = {}
    L = {}
    incl: dict[tuple[str, str], np.ndarray] = {}
    trunc: dict[tuple[str, str], np.ndarray] = {}
    for u in cat.arrow_order:
        d, a = cat.src(u), cat.tgt(u)
        tau[u] = {p: p for p in base[a]}
        pi[u] = {p: p for p in base[d]}
        L[u] = truncation(d, a)
        incl[(d, a)] = inclusion(d, a)
        trunc[(d, a)] = truncation(d, a)

    Y = FeatureFunctor(cat, base, dims, tau, pi, L, name="graded-target")

    # block identities, exact
    for a in cat.objects:
        for c in cat.objects:
            if not cat.hom(a, c):
                continue
            for d in cat.objects:
                if cat.hom(d, c):
                    prod = truncation(a, c) @ inclusion(d, c)
                    want = inclusion(d, a) if cat.hom(d, a) else np.zeros_like(prod)
                    if prod.shape != want.shape or (prod.size and np.abs(prod - want).max() > 0.0):
                        raise CompileError(f"graded block identity failed at ({d},{a},{c})")
    for a in cat.objects:
        acc = np.zeros((dims[a], dims[a]))
        for d in below[a]:
            acc += inclusion(d, a) @ truncation(d, a)
        if acc.size and np.abs(acc - np.eye(dims[a])).max() > 0.0:
            raise CompileError(f"partition of identity failed at {a}")

    entries = {}
    for u in cat.arrow_order:
        d, a = cat.src(u), cat.tgt(u)
        mu = cat.weight[u]
        if mu == 0.0:
            continue
        mat = inclusion(d, a) / mu  # Dirac against the atomic weight
        for y in Y.points(a):
            entries[(u, y)] = mat
    kernel = CategoryKernel(Y, Y, entries, None, regime="IN_bundle", name="graded-retraction")
    graded = GradedData(dict(U_dims), below, incl, trunc)
    return Y, Retraction(kernel, "thin_graded", {}, graded)


def compile_equivariant(
    R: Retraction, G: ObjectwiseMap, X: FeatureFunctor, name: str = "compiled"
) -> NetworkSpec:
    """Compile an arbitrary objectwise family into an equivariant network.

    Returns the three-layer composite  lift -> componentwise(G) -> bundle
    convolution with the retraction kernel.  The lift and the componentwise
    stage are natural for any G, and the retraction kernel satisfies the
    bundle naturality law, so the composite is equivariant even when G is
    not; when G is natural the composite equals G.
    """
    Y = R.target
    cat = X.cat
    for a in cat.objects:
        for u in cat.incoming_arrows(a):
            if cat.weight[u] <= 0.0:
                continue
            b = cat.src(u)
            probe = np.zeros((X.n_points(b), X.fiber_dim[b]))
            try:
                out = np.asarray(G.apply(b, probe))
            except KeyError:
                raise CompileError(f"objectwise family has no map at {b}") from None
            if out.shape != (Y.n_points(b), Y.fiber_dim[b]):
                raise CompileError(
                    f"objectwise map at {b} returns shape {out.shape}, "
                    f"expected {(Y.n_points(b), Y.fiber_dim[b])}"
                )
    layers = [LiftLayer(X), ComponentwiseLayer(G, Y), BundleConvLayer(R.kernel)]
    return NetworkSpec(cat, layers, X, Y, name=name)


def check_retraction(
    R: Retraction, Y: FeatureFunctor, samples: list[Section], tol: float = 1e-9
) -> float:
    """Max over samples and objects of || bundle_conv(R, lift(h)) - h ||."""
    worst = 0.0
    for h in samples:
        for a, arr in h.data.items():
            if arr.size == 0:
                continue
            out = bundle_conv_forward(R.kernel, bundle_lift(Y, h, a))
            worst = max(worst, float(np.abs(out - arr).max()))
    return worst
