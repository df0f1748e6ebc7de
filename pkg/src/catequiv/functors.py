"""Feature functors: finite base sets, matrix fiber transports, sections.

A feature functor assigns each object a finite ordered base point set and a
fiber dimension, and each arrow ``u: b -> a`` a base pullback ``tau_u:
Omega(a) -> Omega(b)``, a base pushforward ``pi_u: Omega(b) -> Omega(a)`` and
a fiber transport matrix ``L_u: E(a) -> E(b)``.  Sections (fields of fiber
vectors over base points) are transported contravariantly:

    (F(u) f)(y) = L_u @ f(pi_u(y))        for y in Omega(src(u)).

Flattening of a section into a vector is point-major, fiber-minor (C order of
the ``(#points, fiber_dim)`` array); every matrix in the package follows it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .category import FiniteCategory, ValidationReport
from .errors import FunctorError

EXACT_TOL = 1e-12


class FeatureFunctor:
    """Contravariant functor into finite-dimensional section spaces.

    ``tau``/``pi`` are explicit point-id maps per arrow (``pi`` is required
    even when ``tau`` is bijective; the two are related only through the
    mixed-base law).  ``L`` maps each arrow to an ``n(src) x n(tgt)`` matrix.
    """

    def __init__(
        self,
        cat: FiniteCategory,
        base: dict[str, list[str]],
        fiber_dim: dict[str, int],
        tau: dict[str, dict[str, str]],
        pi: dict[str, dict[str, str]],
        L: dict[str, np.ndarray],
        name: str = "",
    ):
        self.cat = cat
        self.base = {a: list(pts) for a, pts in base.items()}
        self.fiber_dim = {a: int(n) for a, n in fiber_dim.items()}
        self.tau = {u: dict(m) for u, m in tau.items()}
        self.pi = {u: dict(m) for u, m in pi.items()}
        self.L = {u: np.asarray(m, dtype=float) for u, m in L.items()}
        self.name = name
        self._point_index = {
            a: {p: i for i, p in enumerate(pts)} for a, pts in self.base.items()
        }

    def points(self, a: str) -> list[str]:
        return self.base[a]

    def point_index(self, a: str, p: str) -> int:
        return self._point_index[a][p]

    def n_points(self, a: str) -> int:
        return len(self.base[a])

    def dim(self, a: str) -> int:
        """Flattened section-space dimension at ``a``."""
        return len(self.base[a]) * self.fiber_dim[a]

    def tau_index(self, u: str, y_idx: int) -> int:
        """tau_u as an index map Omega(tgt) -> Omega(src)."""
        a, b = self.cat.tgt(u), self.cat.src(u)
        return self._point_index[b][self.tau[u][self.base[a][y_idx]]]

    def pi_index(self, u: str, y_idx: int) -> int:
        """pi_u as an index map Omega(src) -> Omega(tgt)."""
        a, b = self.cat.tgt(u), self.cat.src(u)
        return self._point_index[a][self.pi[u][self.base[b][y_idx]]]

    def transport_bound(self, a: str) -> float:
        """Essential transport bound: max spectral norm of L_u over positive-weight incoming arrows."""
        best = 0.0
        for u in self.cat.incoming_arrows(a):
            if self.cat.weight[u] > 0.0 and self.L[u].size:
                best = max(best, float(np.linalg.norm(self.L[u], 2)))
        return best


@dataclass
class Section:
    """A field of fiber vectors per object; may be populated on a subset."""

    functor: FeatureFunctor
    data: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.data = {a: np.asarray(v, dtype=float) for a, v in self.data.items()}

    def copy(self) -> "Section":
        return Section(self.functor, {a: v.copy() for a, v in self.data.items()})

    def sup_norm(self) -> float:
        """max over populated objects and base points of the Euclidean fiber norm."""
        if not self.data:
            return 0.0
        return max(
            float(np.linalg.norm(v, axis=1).max()) if v.size else 0.0
            for v in self.data.values()
        )


@dataclass
class ProbeFamily:
    """Arrow-indexed evaluation maps sigma_u: Omega(tgt) -> Omega(src).

    Identity arrows must carry the identity map.  For thin/discrete
    categories the default probe is tau itself; for one-object group
    categories it is the constant-identity family.
    """

    sigma: dict[str, dict[str, str]]

    def index(self, F: FeatureFunctor, u: str, y_idx: int) -> int:
        a, b = F.cat.tgt(u), F.cat.src(u)
        return F.point_index(b, self.sigma[u][F.points(a)[y_idx]])


def tau_probe(F: FeatureFunctor) -> ProbeFamily:
    return ProbeFamily({u: dict(m) for u, m in F.tau.items()})


def identity_probe(F: FeatureFunctor) -> ProbeFamily:
    """Constant-identity probe; only valid when every arrow is an endo-arrow
    on an object whose base equals its source's base (e.g. one-object categories)."""
    sigma = {}
    for u in F.cat.arrow_order:
        a, b = F.cat.tgt(u), F.cat.src(u)
        if F.base[a] != F.base[b]:
            raise FunctorError(f"identity probe untypable on arrow {u}: bases differ")
        sigma[u] = {p: p for p in F.base[a]}
    return ProbeFamily(sigma)


def transport_operator(F: FeatureFunctor, u: str) -> np.ndarray:
    """Matrix of ``f -> L_u ∘ f ∘ pi_u`` in the canonical flattening.

    Shape ``(n_points(src)*n(src), n_points(tgt)*n(tgt))``; applying it to a
    flattened section at ``tgt(u)`` equals pointwise evaluation
    ``(F(u)f)(y) = L_u @ f(pi_u(y))``.
    """
    if u not in F.L or u not in F.pi:
        raise FunctorError(f"arrow {u} unknown to functor {F.name or '<unnamed>'}")
    a, b = F.cat.tgt(u), F.cat.src(u)
    na, nb = F.fiber_dim[a], F.fiber_dim[b]
    Pb, Pa = F.n_points(b), F.n_points(a)
    op = np.zeros((Pb * nb, Pa * na))
    L = F.L[u]
    for q in range(Pb):
        p = F.pi_index(u, q)
        op[q * nb : (q + 1) * nb, p * na : (p + 1) * na] = L
    return op


def transport_section_array(F: FeatureFunctor, u: str, arr: np.ndarray) -> np.ndarray:
    """Apply F(u) to an ``(n_points(tgt), n(tgt))`` array, giving one at src(u)."""
    b = F.cat.src(u)
    out = np.empty((F.n_points(b), F.fiber_dim[b]))
    L = F.L[u]
    for q in range(F.n_points(b)):
        out[q] = L @ arr[F.pi_index(u, q)]
    return out


def transport_section(F: FeatureFunctor, u: str, x: Section) -> np.ndarray:
    a = F.cat.tgt(u)
    if a not in x.data:
        raise FunctorError(f"section not populated at {a}")
    return transport_section_array(F, u, x.data[a])


def validate_functor(cat: FiniteCategory, F: FeatureFunctor) -> ValidationReport:
    """Check functoriality, identity laws, the mixed-base law, and shapes."""
    report = ValidationReport(f"functor:{F.name or '<unnamed>'}")

    for a in cat.objects:
        if a not in F.base:
            report.add("shape", (a,), f"no base set at object {a}")
        # zero dims are legal for inert objects (they contribute nothing to sums)
        if F.fiber_dim.get(a, 0) < 0:
            report.add("shape", (a,), f"fiber dimension at {a} must be nonnegative")

    for u in cat.arrow_order:
        a, b = cat.tgt(u), cat.src(u)
        if u not in F.tau or u not in F.pi or u not in F.L:
            report.add("shape", (u,), f"arrow {u} missing tau/pi/L data")
            continue
        if set(F.tau[u]) != set(F.base.get(a, [])) or not set(F.tau[u].values()) <= set(F.base.get(b, [])):
            report.add("shape", (u,), f"tau_{u} is not a map Omega({a}) -> Omega({b})")
        if set(F.pi[u]) != set(F.base.get(b, [])) or not set(F.pi[u].values()) <= set(F.base.get(a, [])):
            report.add("shape", (u,), f"pi_{u} is not a map Omega({b}) -> Omega({a})")
        if F.L[u].shape != (F.fiber_dim.get(b, -1), F.fiber_dim.get(a, -1)):
            report.add("shape", (u,), f"L_{u} has shape {F.L[u].shape}, expected ({F.fiber_dim.get(b)}, {F.fiber_dim.get(a)})")
    if not report.ok:
        return report

    for a in cat.objects:
        e = cat.identities[a]
        if any(F.tau[e][p] != p for p in F.base[a]):
            report.add("identity", (e,), f"tau_id at {a} is not the identity")
        if any(F.pi[e][p] != p for p in F.base[a]):
            report.add("identity", (e,), f"pi_id at {a} is not the identity")
        res = float(np.abs(F.L[e] - np.eye(F.fiber_dim[a])).max())
        if res > EXACT_TOL:
            report.add("identity", (e,), f"L_id at {a} is not the identity", residual=res)

    # contravariant composition and the mixed-base law on all composable pairs
    for u in cat.arrow_order:
        for v in cat.arrow_order:
            if cat.src(u) != cat.tgt(v):
                continue
            uv = cat.compose(u, v)
            a = cat.tgt(u)
            mism = sum(
                F.tau[uv][p] != F.tau[v][F.tau[u][p]] for p in F.base[a]
            )
            if mism:
                report.add("functoriality", (u, v), f"tau_{{u∘v}} != tau_v∘tau_u at {mism} point(s)")
            c = cat.src(v)
            mism = sum(
                F.pi[uv][p] != F.pi[u][F.pi[v][p]] for p in F.base[c]
            )
            if mism:
                report.add("functoriality", (u, v), f"pi_{{u∘v}} != pi_u∘pi_v at {mism} point(s)")
            res = float(np.abs(F.L[uv] - F.L[v] @ F.L[u]).max())
            if res > EXACT_TOL:
                report.add("functoriality", (u, v), f"L_{{u∘v}} != L_v·L_u", residual=res)

    # mixed-base law: tau_{w∘u} ∘ pi_w = tau_u for w: a -> c, u: b -> a
    for w in cat.arrow_order:
        for u in cat.arrow_order:
            if cat.src(w) != cat.tgt(u):
                continue
            wu = cat.compose(w, u)
            a = cat.src(w)
            mism = sum(
                F.tau[wu][F.pi[w][p]] != F.tau[u][p] for p in F.base[a]
            )
            if mism:
                report.add("mixed_base", (w, u), f"tau_{{w∘u}}∘pi_w != tau_u at {mism} point(s)")

    return report


def check_separation(
    cat: FiniteCategory,
    F: FeatureFunctor,
    sigma: ProbeFamily,
    a: str,
    samples: list[np.ndarray],
    tol: float = 1e-9,
) -> ValidationReport:
    """Arrow-evaluation separation of sample sections at object ``a``.

    For every pair of samples further than ``tol`` apart (sup norm) and every
    base point ``y``, some incoming arrow must separate their probe
    evaluations.  This is a sampling surrogate: it certifies separation on the
    supplied finite set only.
    """
    report = ValidationReport(f"separation@{a}")
    arrows = cat.incoming_arrows(a)
    arrs = [np.asarray(s, dtype=float) for s in samples]
    transported = [
        {u: transport_section_array(F, u, s) for u in arrows} for s in arrs
    ]
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            if float(np.abs(arrs[i] - arrs[j]).max()) <= tol:
                continue  # not distinct at tolerance; pair skipped
            for y_idx in range(F.n_points(a)):
                hit = False
                for u in arrows:
                    q = sigma.index(F, u, y_idx)
                    gap = float(
                        np.linalg.norm(transported[i][u][q] - transported[j][u][q])
                    )
                    if gap > tol:
                        hit = True
                        break
                if not hit:
                    report.add(
                        "separation", (i, j, F.points(a)[y_idx]),
                        f"no incoming arrow separates samples {i},{j} at point {F.points(a)[y_idx]}",
                    )
    return report


def random_section(
    F: FeatureFunctor, rng: np.random.Generator, objects: list[str] | None = None,
    low: float = -1.0, high: float = 1.0,
) -> Section:
    objs = F.cat.objects if objects is None else objects
    data = {
        a: rng.uniform(low, high, size=(F.n_points(a), F.fiber_dim[a])) for a in objs
    }
    return Section(F, data)


def scalar_stack(F: FeatureFunctor, m: int, name: str | None = None) -> FeatureFunctor:
    """The m-channel scalar functor over F's base: same tau/pi, identity fiber transports.

    Its transport action is bare precomposition by pi, the functor the gates
    and identity-supported affine stages operate on.
    """
    return FeatureFunctor(
        cat=F.cat,
        base=F.base,
        fiber_dim={a: m for a in F.base},
        tau=F.tau,
        pi=F.pi,
        L={u: np.eye(m) for u in F.cat.arrow_order},
        name=name or f"scalar^{m}({F.name})",
    )
