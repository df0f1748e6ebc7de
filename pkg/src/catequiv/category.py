"""Finite categories with per-arrow measure weights.

A category is stored extensionally: objects, arrows with source/target, a
total composition table over composable pairs, identity arrows, and a
nonnegative weight per arrow (the atomic measure; all-ones is counting
measure).  Everything downstream treats integrals over incoming arrows as
weighted finite sums, so validation here is what makes later layer algebra
exactly checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CategoryError

WEIGHT_TOL = 1e-12  # weights come from exact input or integer-count normalization


@dataclass(frozen=True)
class Arrow:
    arrow_id: str
    src: str
    tgt: str


@dataclass
class Violation:
    kind: str
    witness: tuple
    detail: str
    residual: float | None = None

    def __str__(self) -> str:
        r = f" (residual {self.residual:.3g})" if self.residual is not None else ""
        return f"[{self.kind}] {self.detail}{r}  witness={self.witness}"


@dataclass
class ValidationReport:
    subject: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, witness: tuple, detail: str, residual: float | None = None) -> None:
        self.violations.append(Violation(kind, witness, detail, residual))

    def __str__(self) -> str:
        if self.ok:
            return f"{self.subject}: valid"
        lines = [f"{self.subject}: {len(self.violations)} violation(s)"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)


class FiniteCategory:
    """Immutable-after-construction finite category with measure weights.

    Parameters
    ----------
    objects : ordered object identifiers (opaque strings).
    arrows : list of ``(arrow_id, src, tgt)`` triples.
    identities : map object -> arrow_id of its identity.
    composition : map ``(f, g) -> f∘g`` over pairs with ``src(f) == tgt(g)``;
        for ``f: b->a`` and ``g: c->b`` the composite ``f∘g`` runs ``c->a``.
    weight : map arrow_id -> nonnegative float; missing means counting measure.

    Arrow order is fixed at load time, lexicographic by arrow_id, and every
    derived index (incoming bundles, hom-sets) respects it, so matrix assembly
    downstream is deterministic.
    """

    def __init__(
        self,
        objects: list[str],
        arrows: list[tuple[str, str, str]],
        identities: dict[str, str],
        composition: dict[tuple[str, str], str],
        weight: dict[str, float] | None = None,
        meta: dict | None = None,
    ):
        self.objects = list(objects)
        self.arrows = {a_id: Arrow(a_id, src, tgt) for a_id, src, tgt in arrows}
        if len(self.arrows) != len(arrows):
            raise CategoryError("duplicate arrow ids")
        self.identities = dict(identities)
        self.composition = dict(composition)
        if weight is None:
            weight = {a_id: 1.0 for a_id in self.arrows}
        self.weight = {a_id: float(weight.get(a_id, 1.0)) for a_id in self.arrows}
        self.meta = dict(meta or {})

        self.arrow_order = sorted(self.arrows)
        obj_set = set(self.objects)
        for arr in self.arrows.values():
            if arr.src not in obj_set or arr.tgt not in obj_set:
                raise CategoryError(f"arrow {arr.arrow_id} references unknown object")
        self._incoming = {
            a: tuple(u for u in self.arrow_order if self.arrows[u].tgt == a)
            for a in self.objects
        }
        self._hom: dict[tuple[str, str], tuple[str, ...]] = {}
        for u in self.arrow_order:
            arr = self.arrows[u]
            self._hom.setdefault((arr.src, arr.tgt), ())
            self._hom[(arr.src, arr.tgt)] += (u,)

    # -- basic queries ------------------------------------------------------

    def src(self, u: str) -> str:
        return self.arrows[u].src

    def tgt(self, u: str) -> str:
        return self.arrows[u].tgt

    def hom(self, b: str, a: str) -> tuple[str, ...]:
        """Arrows b -> a in canonical order."""
        return self._hom.get((b, a), ())

    def compose(self, f: str, g: str) -> str:
        """Composite ``f∘g`` (apply g first); raises if not composable."""
        try:
            return self.composition[(f, g)]
        except KeyError:
            raise CategoryError(f"composition undefined for ({f}, {g})") from None

    def is_identity(self, u: str) -> bool:
        return self.identities.get(self.arrows[u].tgt) == u and self.arrows[u].src == self.arrows[u].tgt

    def incoming_weight(self, a: str) -> float:
        return sum(self.weight[u] for u in self.incoming_arrows(a))

    def incoming_arrows(self, a: str) -> list[str]:
        """The incoming-arrow bundle of ``a``: all arrows with target ``a``."""
        if a not in self._incoming:
            raise CategoryError(f"unknown object {a!r}")
        return list(self._incoming[a])

    def inverse(self, u: str) -> str | None:
        """Two-sided inverse of ``u`` found by table search, or None."""
        arr = self.arrows[u]
        for v in self.hom(arr.tgt, arr.src):
            if (
                self.composition.get((u, v)) == self.identities.get(arr.tgt)
                and self.composition.get((v, u)) == self.identities.get(arr.src)
            ):
                return v
        return None

    def is_groupoid(self) -> bool:
        return all(self.inverse(u) is not None for u in self.arrow_order)


def incoming_arrows(cat: FiniteCategory, a: str) -> list[str]:
    return cat.incoming_arrows(a)


def validate_category(cat: FiniteCategory) -> ValidationReport:
    """Check the category axioms; violations become report entries.

    Checks identity laws, associativity on all composable triples, typing of
    the composition table (defined exactly on composable pairs, with the
    right source/target), and weight nonnegativity/finiteness.
    """
    report = ValidationReport("category")

    for a in cat.objects:
        u = cat.identities.get(a)
        if u is None or u not in cat.arrows:
            report.add("identity", (a,), f"object {a} has no identity arrow")
            continue
        arr = cat.arrows[u]
        if arr.src != a or arr.tgt != a:
            report.add("identity", (a, u), f"identity of {a} is not an endo-arrow")

    # composition table typing: defined iff composable, with correct endpoints
    for (f, g), h in cat.composition.items():
        if f not in cat.arrows or g not in cat.arrows or h not in cat.arrows:
            report.add("typing", (f, g, h), "composition entry references unknown arrow")
            continue
        if cat.src(f) != cat.tgt(g):
            report.add("typing", (f, g), "composition defined on non-composable pair")
        elif cat.src(h) != cat.src(g) or cat.tgt(h) != cat.tgt(f):
            report.add("typing", (f, g, h), "composite has wrong source or target")
    for f in cat.arrow_order:
        for g in cat.arrow_order:
            if cat.src(f) == cat.tgt(g) and (f, g) not in cat.composition:
                report.add("typing", (f, g), "composable pair missing from table")

    # identity laws
    for u in cat.arrow_order:
        arr = cat.arrows[u]
        id_t = cat.identities.get(arr.tgt)
        id_s = cat.identities.get(arr.src)
        if id_t is not None and cat.composition.get((id_t, u)) != u:
            report.add("identity_law", (id_t, u), f"id∘{u} != {u}")
        if id_s is not None and cat.composition.get((u, id_s)) != u:
            report.add("identity_law", (u, id_s), f"{u}∘id != {u}")

    # associativity on all composable triples
    for f in cat.arrow_order:
        for g in cat.arrow_order:
            if cat.src(f) != cat.tgt(g) or (f, g) not in cat.composition:
                continue
            fg = cat.composition[(f, g)]
            for h in cat.arrow_order:
                if cat.src(g) != cat.tgt(h) or (g, h) not in cat.composition:
                    continue
                gh = cat.composition[(g, h)]
                left = cat.composition.get((fg, h))
                right = cat.composition.get((f, gh))
                if left != right or left is None:
                    report.add("associativity", (f, g, h), f"(f∘g)∘h={left} vs f∘(g∘h)={right}")

    for u, w in cat.weight.items():
        if not (w >= 0.0) or w != w or w == float("inf"):
            report.add("weight", (u,), f"weight of {u} is {w}")

    return report


def check_measure_properties(cat: FiniteCategory, mode: str) -> ValidationReport:
    """Diagnostics on the weight family; never a precondition for layers.

    Modes
    -----
    ``nsp`` : every postcomposition ``w∘-`` maps positive-weight arrows to
        positive-weight arrows.
    ``left_coherent`` : pushforward of each hom-set weight along ``w∘-``
        reproduces the target hom-set weights.
    ``bi_coherent`` : left coherence plus the precomposition analogue.
    """
    if mode not in ("nsp", "left_coherent", "bi_coherent"):
        raise CategoryError(f"unknown measure mode {mode!r}")
    report = ValidationReport(f"measure:{mode}")

    if mode == "nsp":
        for w in cat.arrow_order:
            a = cat.src(w)
            for u in cat.incoming_arrows(a):
                if cat.weight[u] > 0.0 and cat.weight[cat.compose(w, u)] <= 0.0:
                    report.add("nsp", (w, u), f"w∘u={cat.compose(w, u)} has zero weight")
        return report

    def check_post(report: ValidationReport) -> None:
        # (w∘-)_# μ_{b,a} must equal μ_{b,c} for every w: a -> c and object b
        for w in cat.arrow_order:
            a, c = cat.src(w), cat.tgt(w)
            for b in cat.objects:
                for v in cat.hom(b, c):
                    pushed = sum(
                        cat.weight[u] for u in cat.hom(b, a) if cat.compose(w, u) == v
                    )
                    if abs(pushed - cat.weight[v]) > WEIGHT_TOL:
                        report.add(
                            "left_coherence", (w, b, v),
                            f"pushforward along {w}∘- gives {pushed} on {v}, expected {cat.weight[v]}",
                            residual=abs(pushed - cat.weight[v]),
                        )

    check_post(report)
    if mode == "bi_coherent":
        # (-∘v)_# μ_{c,a} must equal μ_{b,a} for every v: b -> c and object a
        for v in cat.arrow_order:
            b, c = cat.src(v), cat.tgt(v)
            for a in cat.objects:
                for t in cat.hom(b, a):
                    pushed = sum(
                        cat.weight[u] for u in cat.hom(c, a) if cat.compose(u, v) == t
                    )
                    if abs(pushed - cat.weight[t]) > WEIGHT_TOL:
                        report.add(
                            "bi_coherence", (v, a, t),
                            f"pushforward along -∘{v} gives {pushed} on {t}, expected {cat.weight[t]}",
                            residual=abs(pushed - cat.weight[t]),
                        )
    return report
