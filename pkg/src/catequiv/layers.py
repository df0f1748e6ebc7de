"""Forward evaluation of the admissible layer types and naturality checking.

Every layer acts objectwise: the output at an object depends only on the
input value at that object (convolutions pull the target object's section
back through its incoming arrows).  Equivariance is the statement that these
objectwise maps commute with the functorial transports along every arrow, and
is checked numerically by `check_equivariance`.

Intermediate values are either sections (arrays over base points) or arrow
bundles (one array per incoming arrow).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .category import FiniteCategory
from .errors import LayerError
from .functors import (
    FeatureFunctor,
    ProbeFamily,
    Section,
    transport_section_array,
)
from .kernels import CategoryKernel, ScalarChannel

RESIDUAL_TOL = 1e-9  # double-precision accumulation over <= 1e3-term sums


# ---------------------------------------------------------------------------
# activations

@dataclass(frozen=True)
class Activation:
    """Continuous, globally Lipschitz, nonpolynomial activation."""

    kind: str
    slope: float = 0.01

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "tanh", "softplus"):
            raise LayerError(f"activation {self.kind!r} not admitted")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "leaky_relu":
            return np.where(x >= 0, x, self.slope * x)
        if self.kind == "tanh":
            return np.tanh(x)
        return np.logaddexp(0.0, x)  # softplus

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            return (x > 0).astype(float)
        if self.kind == "leaky_relu":
            return np.where(x >= 0, 1.0, self.slope)
        if self.kind == "tanh":
            return 1.0 - np.tanh(x) ** 2
        return 1.0 / (1.0 + np.exp(-x))

    @property
    def lipschitz(self) -> float:
        return 1.0


TANH = Activation("tanh")
RELU = Activation("relu")


# ---------------------------------------------------------------------------
# bundles

@dataclass
class BundleSection:
    """One section of the source object per incoming arrow of ``object``."""

    functor: FeatureFunctor
    object: str
    components: dict[str, np.ndarray]

    def __post_init__(self):
        self.components = {u: np.asarray(v, dtype=float) for u, v in self.components.items()}

    def norm(self) -> float:
        """Essential sup: components at zero-weight arrows are ignored."""
        cat = self.functor.cat
        vals = [
            float(np.linalg.norm(v, axis=1).max())
            for u, v in self.components.items()
            if cat.weight[u] > 0.0 and v.size
        ]
        return max(vals, default=0.0)


def bundle_lift(F: FeatureFunctor, x: Section, a: str) -> BundleSection:
    """Lift a section to its arrow bundle: component at u is F(u) applied at a."""
    if a not in x.data:
        raise LayerError(f"section not populated at {a}")
    return bundle_lift_array(F, x.data[a], a)


def bundle_lift_array(F: FeatureFunctor, arr: np.ndarray, a: str) -> BundleSection:
    comps = {
        u: transport_section_array(F, u, arr) for u in F.cat.incoming_arrows(a)
    }
    return BundleSection(F, a, comps)


def bundle_reindex(cat: FiniteCategory, w: str, h: BundleSection) -> BundleSection:
    """Reindex a bundle at tgt(w) to one at src(w) by precomposition with w."""
    c = cat.tgt(w)
    if h.object != c:
        raise LayerError(f"bundle lives at {h.object}, arrow {w} targets {c}")
    a = cat.src(w)
    comps = {u: h.components[cat.compose(w, u)] for u in cat.incoming_arrows(a)}
    return BundleSection(h.functor, a, comps)


# ---------------------------------------------------------------------------
# objectwise map families (componentwise lifts, compilation blocks)

class ObjectwiseMap:
    """One continuous map per object; subclasses provide apply + a Lipschitz constant."""

    def apply(self, obj: str, arr: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, obj: str) -> float:
        raise NotImplementedError


@dataclass
class AffineMap(ObjectwiseMap):
    """Objectwise affine maps on flattened sections.

    ``matrices[a]`` maps flat source sections at ``a`` to flat target
    sections; ``biases[a]`` is a flat target vector (optional).
    """

    source: FeatureFunctor
    target: FeatureFunctor
    matrices: dict[str, np.ndarray]
    biases: dict[str, np.ndarray] | None = None

    def apply(self, obj, arr):
        out = self.matrices[obj] @ arr.ravel()
        if self.biases is not None and obj in self.biases:
            out = out + self.biases[obj].ravel()
        return out.reshape(self.target.n_points(obj), self.target.fiber_dim[obj])

    def lipschitz(self, obj):
        return float(np.linalg.norm(self.matrices[obj], 2))


@dataclass
class ClipMap(ObjectwiseMap):
    """Metric projection of each fiber vector onto the ball of given radius (1-Lipschitz)."""

    functor: FeatureFunctor
    radius: float

    def apply(self, obj, arr):
        out = arr.copy()
        norms = np.linalg.norm(out, axis=1)
        over = norms > self.radius
        if np.any(over):
            out[over] *= (self.radius / norms[over])[:, None]
        return out

    def lipschitz(self, obj):
        return 1.0


@dataclass
class FragmentMap(ObjectwiseMap):
    """A network fragment evaluated objectwise (used by compilation blocks)."""

    fragment: "NetworkSpec"
    lip: dict[str, float] | None = None

    def apply(self, obj, arr):
        return evaluate_at(self.fragment, obj, arr)

    def lipschitz(self, obj):
        if self.lip is not None:
            return self.lip.get(obj, math.inf)
        return math.inf


@dataclass
class ComposedMap(ObjectwiseMap):
    stages: list[ObjectwiseMap]

    def apply(self, obj, arr):
        for s in self.stages:
            arr = s.apply(obj, arr)
        return arr

    def lipschitz(self, obj):
        out = 1.0
        for s in self.stages:
            out *= s.lipschitz(obj)
        return out


def componentwise_lift(H: ObjectwiseMap, h: BundleSection, target: FeatureFunctor) -> BundleSection:
    """Apply the objectwise family at each component's source object.

    A map is required at every source with positive weight; zero-weight
    components pass through when no map exists (they are measure-null).
    """
    cat = h.functor.cat
    comps = {}
    for u, arr in h.components.items():
        b = cat.src(u)
        try:
            comps[u] = H.apply(b, arr)
        except KeyError:
            if cat.weight[u] > 0.0:
                raise LayerError(f"objectwise map missing at {b} (needed for arrow {u})") from None
            comps[u] = arr
    return BundleSection(target, h.object, comps)


# ---------------------------------------------------------------------------
# the four layer evaluations

def conv_forward_array(kernel: CategoryKernel, a: str, arr: np.ndarray) -> np.ndarray:
    """Category convolution at one object.

    out(y) = bias_a(y) + sum over incoming u of
             mu(u) * K(u, y) @ L_u @ arr[pi_u(tau_u(y))].

    The evaluation point is pi_u(tau_u(y)) exactly; no shortcut to y even
    when pi∘tau is the identity.
    """
    cat = kernel.cat
    Z, Zp = kernel.source, kernel.target
    if arr.shape != (Z.n_points(a), Z.fiber_dim[a]):
        raise LayerError(
            f"section at {a} has shape {arr.shape}, expected {(Z.n_points(a), Z.fiber_dim[a])}"
        )
    out = kernel.bias_at(a).copy()
    for u in cat.incoming_arrows(a):
        mu = cat.weight[u]
        if mu == 0.0:
            continue
        L = Z.L[u]
        for y_idx, y in enumerate(Zp.points(a)):
            p = Z.pi_index(u, Z.tau_index(u, y_idx))
            out[y_idx] += mu * (kernel.entry(u, y) @ (L @ arr[p]))
    return out


def conv_forward(kernel: CategoryKernel, x: Section) -> Section:
    data = {a: conv_forward_array(kernel, a, arr) for a, arr in x.data.items()}
    return Section(kernel.target, data)


def gate_forward_array(
    activation: Activation, channel: ScalarChannel, a: str, arr: np.ndarray
) -> np.ndarray:
    gate = activation(channel.apply(a, arr))
    return arr * gate[:, None]


def gate_forward(activation: Activation, channel: ScalarChannel, z: Section) -> Section:
    if z.functor is not channel.functor and z.functor.name != channel.functor.name:
        raise LayerError("scalar channel was solved for a different functor")
    data = {a: gate_forward_array(activation, channel, a, arr) for a, arr in z.data.items()}
    return Section(z.functor, data)


def bundle_conv_forward(
    kernel: CategoryKernel, h: BundleSection, probe: ProbeFamily | None = None
) -> np.ndarray:
    """Arrow-bundle convolution at the bundle's object.

    Components are evaluated at tau_u(y), or at sigma_u(y) when a probe is
    supplied; a probe may only be combined with a probe-regime kernel.
    """
    if kernel.regime == "IN_probe" and probe is None:
        raise LayerError("probe-regime kernel evaluated without a probe family")
    if kernel.regime == "IN_bundle" and probe is not None:
        raise LayerError("probe supplied for a tau-regime bundle kernel")
    cat = kernel.cat
    a = h.object
    Z, Zp = kernel.source, kernel.target
    out = kernel.bias_at(a).copy()
    for u in cat.incoming_arrows(a):
        mu = cat.weight[u]
        if mu == 0.0:
            continue
        comp = h.components.get(u)
        if comp is None:
            raise LayerError(f"bundle missing component at arrow {u}")
        for y_idx, y in enumerate(Zp.points(a)):
            q = Z.tau_index(u, y_idx) if probe is None else probe.index(Z, u, y_idx)
            out[y_idx] += mu * (kernel.entry(u, y) @ comp[q])
    return out


# ---------------------------------------------------------------------------
# networks

@dataclass(frozen=True)
class ConvLayer:
    kernel: CategoryKernel


@dataclass(frozen=True)
class GateLayer:
    activation: Activation
    channel: ScalarChannel


@dataclass(frozen=True)
class LiftLayer:
    functor: FeatureFunctor


@dataclass(frozen=True)
class ComponentwiseLayer:
    maps: ObjectwiseMap
    target: FeatureFunctor


@dataclass(frozen=True)
class BundleConvLayer:
    kernel: CategoryKernel
    probe: ProbeFamily | None = None


@dataclass(frozen=True)
class ParallelLayer:
    """Evaluate branches on a shared input and stack output fibers.

    The categorical product of natural maps is natural, so stacking preserves
    equivariance; affine branches could equally be merged into one kernel,
    gates cannot, hence the explicit combinator.
    """

    branches: tuple["NetworkSpec", ...]
    target: FeatureFunctor


Layer = ConvLayer | GateLayer | LiftLayer | ComponentwiseLayer | BundleConvLayer | ParallelLayer


@dataclass
class NetworkSpec:
    """A coherently typed composition of admissible layers."""

    cat: FiniteCategory
    layers: list[Layer]
    input_functor: FeatureFunctor
    output_functor: FeatureFunctor
    name: str = ""
    meta: dict = field(default_factory=dict)


def _apply_layer(layer: Layer, cat: FiniteCategory, a: str, value):
    if isinstance(layer, ConvLayer):
        return conv_forward_array(layer.kernel, a, value)
    if isinstance(layer, GateLayer):
        return gate_forward_array(layer.activation, layer.channel, a, value)
    if isinstance(layer, LiftLayer):
        return bundle_lift_array(layer.functor, value, a)
    if isinstance(layer, ComponentwiseLayer):
        return componentwise_lift(layer.maps, value, layer.target)
    if isinstance(layer, BundleConvLayer):
        return bundle_conv_forward(layer.kernel, value, layer.probe)
    if isinstance(layer, ParallelLayer):
        outs = [evaluate_at(br, a, value) for br in layer.branches]
        return np.concatenate(outs, axis=1)
    raise LayerError(f"unknown layer type {type(layer).__name__}")


def evaluate_at(net: NetworkSpec, a: str, arr: np.ndarray):
    """Run the objectwise map of the network at a single object."""
    value = np.asarray(arr, dtype=float)
    for k, layer in enumerate(net.layers):
        try:
            value = _apply_layer(layer, net.cat, a, value)
        except LayerError as exc:
            if exc.layer_index is None:
                raise LayerError(str(exc), layer_index=k) from None
            raise
    return value


def network_forward(net: NetworkSpec, x: Section) -> Section:
    data = {a: evaluate_at(net, a, arr) for a, arr in x.data.items()}
    return Section(net.output_functor, data)


# ---------------------------------------------------------------------------
# equivariance checking

@dataclass
class EquivarianceReport:
    max_residual: float
    per_arrow: dict[str, float]
    witness: tuple | None = None

    def ok(self, tol: float = RESIDUAL_TOL) -> bool:
        return self.max_residual <= tol


def check_equivariance(
    net: NetworkSpec,
    cat: FiniteCategory,
    samples: list[Section],
    tol: float = RESIDUAL_TOL,
) -> EquivarianceReport:
    """Naturality residual over all arrows and samples.

    For each arrow ``w: a -> c`` and sample section x populated at c,
    compares transporting the output against evaluating on the transported
    input (max-abs difference).
    """
    X, Y = net.input_functor, net.output_functor
    per_arrow: dict[str, float] = {}
    worst, witness = 0.0, None
    for w in cat.arrow_order:
        a, c = cat.src(w), cat.tgt(w)
        res_w = 0.0
        for s_idx, x in enumerate(samples):
            if c not in x.data:
                continue
            out_c = evaluate_at(net, c, x.data[c])
            lhs = transport_section_array(Y, w, out_c)
            rhs = evaluate_at(net, a, transport_section_array(X, w, x.data[c]))
            res = float(np.abs(lhs - rhs).max()) if lhs.size else 0.0
            res_w = max(res_w, res)
            if res > worst:
                worst, witness = res, (w, s_idx)
        per_arrow[w] = res_w
    return EquivarianceReport(worst, per_arrow, witness)


def measure_lipschitz_quotients(
    net: NetworkSpec,
    a: str,
    pairs: list[tuple[np.ndarray, np.ndarray]],
) -> float:
    """Largest observed sup-norm quotient ||f(x)-f(x')|| / ||x-x'|| at one object.

    Sup norm of a section array: max over points of the Euclidean fiber norm
    (the norm the kernel/transport operator bounds are stated in).
    """
    worst = 0.0
    for x, xp in pairs:
        dx = _sup(x - xp)
        if dx == 0.0:
            continue
        dy = _sup(np.asarray(evaluate_at(net, a, x)) - np.asarray(evaluate_at(net, a, xp)))
        worst = max(worst, dy / dx)
    return worst


def _sup(arr: np.ndarray) -> float:
    if arr.ndim == 1:
        arr = arr[None, :]
    return float(np.linalg.norm(arr, axis=1).max()) if arr.size else 0.0
