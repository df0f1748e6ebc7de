"""Desk-scale constructive universal approximation harness.

The approximator follows the constructive recipe: per-object carrier
features (probe evaluations of transported sections), a pointwise MLP over
the stacked carriers realized with identity-supported affine stages and gate
gadgets, assembly of output coordinates in a dual basis, and compilation of
the resulting objectwise blocks through a retraction.  Equivariance of every
fitted network is structural (it comes from the compile step, never from the
loss).

With atomic weights the carrier and affine stages are exact Dirac sums: the
shrinking-support machinery of the continuous theory collapses, so carriers
and affine blocks reproduce their formulas with no approximation error.

Fitting: linear stages (the output assembly) are solved by least squares;
gated stages (hidden MLP weights) by seeded fixed-step gradient descent with
analytic gradients that are finite-difference checkable.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .category import FiniteCategory
from .compilation import Retraction, compile_equivariant
from .errors import LayerError
from .functors import (
    FeatureFunctor,
    ProbeFamily,
    Section,
    random_section,
    scalar_stack,
    transport_section_array,
)
from .kernels import CategoryKernel, ScalarChannel
from .layers import (
    Activation,
    BundleConvLayer,
    ConvLayer,
    GateLayer,
    LiftLayer,
    NetworkSpec,
    ObjectwiseMap,
    ParallelLayer,
    check_equivariance,
    evaluate_at,
)

TANH = Activation("tanh")


# ---------------------------------------------------------------------------
# carriers

@dataclass
class Carrier:
    """One probe feature at an object: arrow, covector, and base weight."""

    arrow: str
    ell: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.ell = np.asarray(self.ell, dtype=float)
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))


def carrier_features(
    X: FeatureFunctor, sigma: ProbeFamily, b: str, carriers: list[Carrier], arr: np.ndarray
) -> np.ndarray:
    """Feature matrix (n_points(b), len(carriers)); column k is
    eta_k(y) * <ell_k, (X(u_k) arr)(sigma_{u_k} y)>."""
    out = np.zeros((X.n_points(b), len(carriers)))
    cache: dict[str, np.ndarray] = {}
    for k, c in enumerate(carriers):
        if c.arrow not in cache:
            cache[c.arrow] = transport_section_array(X, c.arrow, arr)
        zu = cache[c.arrow]
        for y_idx in range(X.n_points(b)):
            q = sigma.index(X, c.arrow, y_idx)
            out[y_idx, k] = c.eta[y_idx] * float(c.ell @ zu[q])
    return out


def default_carriers(
    X: FeatureFunctor, b: str, m: int, rng: np.random.Generator
) -> list[Carrier]:
    """m carriers at object b: arrows cycle identity-first through the incoming
    bundle, covectors are seeded random unit vectors, base weights cycle the
    all-ones weight with one-hot weights when the base has several points."""
    cat = X.cat
    arrows = [cat.identities[b]] + [u for u in cat.incoming_arrows(b) if not cat.is_identity(u)]
    npts = X.n_points(b)
    etas = [np.ones(npts)] + ([np.eye(npts)[i] for i in range(npts)] if npts > 1 else [])
    out = []
    for k in range(m):
        u = arrows[k % len(arrows)]
        nb = X.fiber_dim[cat.src(u)]
        ell = rng.normal(size=nb)
        ell /= np.linalg.norm(ell)
        out.append(Carrier(u, ell, etas[(k // len(arrows)) % len(etas)]))
    return out


# ---------------------------------------------------------------------------
# constructive network fragments

def build_carrier_block(
    X: FeatureFunctor, a: str, u0: str, ell: np.ndarray, eta: np.ndarray | float,
    sigma: ProbeFamily,
) -> NetworkSpec:
    """Fragment computing x -> eta(y) * <ell, (X(u0) x)(sigma_{u0} y)> exactly.

    Realized as lift followed by a probe bundle convolution whose kernel is a
    Dirac mass at u0 (normalized against the atomic weight, so the finite sum
    reproduces the formula with no error term).
    """
    cat = X.cat
    if cat.tgt(u0) != a:
        raise LayerError(f"arrow {u0} does not target {a}")
    mu = cat.weight[u0]
    if mu <= 0.0:
        raise LayerError(f"arrow {u0} has zero weight; Dirac mass unnormalizable")
    S1 = scalar_stack(X, 1, name=f"carrier({a},{u0})")
    ell = np.asarray(ell, dtype=float)
    eta_arr = np.full(X.n_points(a), float(eta)) if np.isscalar(eta) else np.asarray(eta, float)
    entries = {
        (u0, y): (eta_arr[y_idx] / mu) * ell[None, :]
        for y_idx, y in enumerate(X.points(a))
    }
    kernel = CategoryKernel(X, S1, entries, None, regime="IN_probe", name=f"dirac@{u0}")
    return NetworkSpec(cat, [LiftLayer(X), BundleConvLayer(kernel, sigma)], X, S1,
                       name=f"carrier({a},{u0})")


def build_affine_block(
    stack: FeatureFunctor, matrix: np.ndarray, bias: np.ndarray | None = None,
) -> NetworkSpec:
    """Identity-supported convolution computing r(y) -> matrix @ r(y) + bias(y).

    Exact on atomic weights: the Dirac mass at the identity arrow makes the
    affine combination hold with no error term.  Works on any functor with
    identity fiber transports (scalar stacks); the same matrix is used at
    every object, which keeps the block natural.
    """
    matrix = np.asarray(matrix, dtype=float)
    q, m = matrix.shape
    cat = stack.cat
    out_stack = scalar_stack(stack, q, name=f"stack^{q}")
    for a in cat.objects:
        if stack.fiber_dim[a] != m:
            raise LayerError(f"width mismatch at {a}: stack has {stack.fiber_dim[a]}, matrix wants {m}")
    entries = {}
    bias_field = {}
    for a in cat.objects:
        e = cat.identities[a]
        mu = cat.weight[e]
        if mu <= 0.0:
            raise LayerError(f"identity arrow at {a} has zero weight")
        for y in stack.points(a):
            entries[(e, y)] = matrix / mu
        if bias is not None:
            bias_field[a] = np.tile(np.asarray(bias, float)[None, :], (stack.n_points(a), 1))
    kernel = CategoryKernel(
        stack, out_stack, entries, bias_field if bias is not None else None,
        regime="IN", name="identity-affine",
    )
    return NetworkSpec(cat, [ConvLayer(kernel)], stack, out_stack, name="affine")


def coordinate_channel(stack: FeatureFunctor, j: int) -> ScalarChannel:
    """The natural channel selecting fiber coordinate j of a scalar stack."""
    mats = {}
    for a in stack.cat.objects:
        npts, nf = stack.n_points(a), stack.fiber_dim[a]
        mat = np.zeros((npts, npts * nf))
        for p in range(npts):
            mat[p, p * nf + j] = 1.0
        mats[a] = mat
    return ScalarChannel(stack, mats)


def coordinatewise_activation(stack: FeatureFunctor, alpha: Activation) -> NetworkSpec:
    """r -> alpha(r) on a q-channel stack via parallel gate gadgets.

    Each coordinate goes through the three-step gadget: pad to (1, r_j), gate
    by the channel selecting r_j (giving (alpha(r_j), alpha(r_j) r_j)), then
    project the first coordinate.  Branches run in parallel and restack.
    """
    cat = stack.cat
    q = next(iter(stack.fiber_dim.values()))
    branches = []
    for j in range(q):
        pad = np.zeros((2, q))
        pad[1, j] = 1.0
        t_j = build_affine_block(stack, pad, bias=np.array([1.0, 0.0]))
        two = t_j.output_functor
        gate = GateLayer(alpha, coordinate_channel(two, 1))
        proj = build_affine_block(two, np.array([[1.0, 0.0]]))
        branches.append(NetworkSpec(
            cat, t_j.layers + [gate] + proj.layers, stack, proj.output_functor,
            name=f"alpha@{j}",
        ))
    out_stack = scalar_stack(stack, q, name=f"stack^{q}")
    return NetworkSpec(cat, [ParallelLayer(tuple(branches), out_stack)], stack, out_stack,
                       name="coordinatewise-activation")


def build_gate_mlp(
    stack: FeatureFunctor,
    weights: list[tuple[np.ndarray, np.ndarray]],
    alpha: Activation = TANH,
) -> NetworkSpec:
    """Pointwise MLP over the stacked channels, alternating identity-supported
    affine blocks with gate gadgets; the last affine has no activation.

    The fragment output equals the reference MLP evaluation exactly (up to
    float roundoff), since every stage is a Dirac sum.
    """
    cat = stack.cat
    layers = []
    cur = stack
    for idx, (W, b) in enumerate(weights):
        aff = build_affine_block(cur, W, b)
        layers += aff.layers
        cur = aff.output_functor
        if idx < len(weights) - 1:
            act = coordinatewise_activation(cur, alpha)
            layers += act.layers
            cur = act.output_functor
    return NetworkSpec(cat, layers, stack, cur, name="gate-mlp")


def mlp_reference(
    weights: list[tuple[np.ndarray, np.ndarray]], alpha: Activation, z: np.ndarray
) -> np.ndarray:
    """Plain MLP evaluation used as the oracle for the gate realization."""
    out = np.asarray(z, dtype=float)
    for idx, (W, b) in enumerate(weights):
        out = np.asarray(W) @ out + np.asarray(b)
        if idx < len(weights) - 1:
            out = alpha(out)
    return out


# ---------------------------------------------------------------------------
# gate-MLP objectwise blocks (the fitted family)

@dataclass
class BlockParams:
    carriers: list[Carrier]
    W: np.ndarray  # (width, m)
    d: np.ndarray  # (width,)
    C: np.ndarray  # (n_Y, m + width)
    c: np.ndarray  # (n_Y,)


class GateMlpMap(ObjectwiseMap):
    """Objectwise carrier -> hidden -> affine blocks, one per object.

    Used as the componentwise family inside a compiled network; each block is
    a finite composition of carrier, gate, and affine primitives, so it is
    globally Lipschitz with a constant read off its weights.
    """

    def __init__(self, X, Y, sigma, params: dict[str, BlockParams], alpha: Activation = TANH):
        self.X, self.Y, self.sigma = X, Y, sigma
        self.params = params
        self.alpha = alpha

    def features(self, b: str, arr: np.ndarray) -> np.ndarray:
        p = self.params[b]
        phi = carrier_features(self.X, self.sigma, b, p.carriers, arr)
        if p.W.shape[0]:
            hidden = self.alpha(phi @ p.W.T + p.d)
            return np.concatenate([phi, hidden], axis=1)
        return phi

    def apply(self, b, arr):
        p = self.params[b]
        return self.features(b, arr) @ p.C.T + p.c

    def lipschitz(self, b):
        p = self.params[b]
        feat = max(
            (float(np.abs(c.eta).max() * np.linalg.norm(c.ell) * np.linalg.norm(self.X.L[c.arrow], 2))
             for c in p.carriers), default=0.0)
        hid = float(np.linalg.norm(p.W, 2)) * self.alpha.lipschitz if p.W.shape[0] else 0.0
        return float(np.linalg.norm(p.C, 2)) * feat * max(1.0, hid)

    def to_fragment(self, b: str) -> NetworkSpec:
        """The same block expressed with the constructive primitives at one object."""
        p = self.params[b]
        cat = self.X.cat
        branches = tuple(
            build_carrier_block(self.X, b, c.arrow, c.ell, c.eta, self.sigma)
            for c in p.carriers
        )
        m = len(p.carriers)
        stack_m = scalar_stack(self.X, m, name=f"stack^{m}")
        layers: list = [ParallelLayer(branches, stack_m)]
        if p.W.shape[0]:
            # [phi; alpha(W phi + d)] then the output affine
            w = p.W.shape[0]
            pre = build_affine_block(stack_m, np.vstack([np.eye(m), p.W]),
                                     np.concatenate([np.zeros(m), p.d]))
            layers += pre.layers
            keep = coordinatewise_partial_activation(pre.output_functor, self.alpha, range(m, m + w))
            layers += keep.layers
            cur = keep.output_functor
        else:
            cur = stack_m
        out = build_affine_block(cur, p.C, p.c)
        layers += out.layers
        return NetworkSpec(cat, layers, self.X, out.output_functor, name=f"block@{b}")


def coordinatewise_partial_activation(stack, alpha, active) -> NetworkSpec:
    """alpha on a subset of channels, identity on the rest (parallel gadgets)."""
    cat = stack.cat
    q = next(iter(stack.fiber_dim.values()))
    active = set(active)
    branches = []
    for j in range(q):
        if j in active:
            pad = np.zeros((2, q))
            pad[1, j] = 1.0
            t_j = build_affine_block(stack, pad, bias=np.array([1.0, 0.0]))
            two = t_j.output_functor
            gate = GateLayer(alpha, coordinate_channel(two, 1))
            proj = build_affine_block(two, np.array([[1.0, 0.0]]))
            branches.append(NetworkSpec(cat, t_j.layers + [gate] + proj.layers,
                                        stack, proj.output_functor))
        else:
            sel = np.zeros((1, q))
            sel[0, j] = 1.0
            branches.append(build_affine_block(stack, sel))
    out_stack = scalar_stack(stack, q, name=f"stack^{q}")
    return NetworkSpec(cat, [ParallelLayer(tuple(branches), out_stack)], stack, out_stack)


# ---------------------------------------------------------------------------
# equivariant targets

class TanhAffineMap(ObjectwiseMap):
    """Seeded random objectwise affine-plus-activation maps (generically non-natural)."""

    def __init__(self, X, Y, seed: int, amplitude: float = 0.7):
        self.X, self.Y = X, Y
        rng = np.random.default_rng(seed)
        self.params = {}
        for b in X.cat.objects:
            din, dout = X.dim(b), Y.dim(b)
            self.params[b] = (
                rng.uniform(-amplitude, amplitude, size=(dout, din)),   # tanh branch weight
                rng.uniform(-0.3, 0.3, size=din),                        # tanh shift
                rng.uniform(-0.5, 0.5, size=(dout, din)),                # linear branch
                rng.uniform(-0.3, 0.3, size=dout),                       # offset
            )

    def apply(self, b, arr):
        A, d, B, c = self.params[b]
        flat = arr.ravel()
        out = A @ np.tanh(flat + d) + B @ flat + c
        return out.reshape(self.Y.n_points(b), self.Y.fiber_dim[b])

    def lipschitz(self, b):
        A, _, B, _ = self.params[b]
        return float(np.linalg.norm(A, 2) + np.linalg.norm(B, 2))


def sample_equivariant_target(R: Retraction, X: FeatureFunctor, seed: int) -> NetworkSpec:
    """Compile seeded random objectwise maps into a guaranteed-equivariant target."""
    G = TanhAffineMap(X, R.target, seed)
    return compile_equivariant(R, G, X, name=f"target(seed={seed})")


# ---------------------------------------------------------------------------
# fitting

@dataclass
class FitArchitecture:
    retraction: Retraction
    X: FeatureFunctor
    sigma: ProbeFamily
    carriers: int
    width: int
    activation: Activation = TANH


@dataclass
class FitBudget:
    iterations: int = 300
    step: float = 0.2


class FitState:
    """Precomputed tables tying the compiled prediction to the block parameters.

    For each object b, PHI[b] stacks the carrier features of every transported
    sample/evaluation point routed through b; CONTRIB[b] carries the
    retraction weights that mix block outputs into each scalar target
    equation.  The prediction is linear in (C, c) given the hidden layer, and
    smooth in (W, d).
    """

    def __init__(self, arch: FitArchitecture, target: NetworkSpec,
                 samples: dict[str, list[np.ndarray]], seed: int):
        self.arch = arch
        X, Y = arch.X, arch.retraction.target
        cat = X.cat
        rng = np.random.default_rng(seed)
        self.carriers = {b: default_carriers(X, b, arch.carriers, rng) for b in cat.objects}
        self.X, self.Y, self.cat = X, Y, cat
        self.F = sorted(samples)
        m, w = arch.carriers, arch.width

        rows: dict[str, list[np.ndarray]] = {b: [] for b in cat.objects}
        contrib: dict[str, list[tuple[int, int, np.ndarray]]] = {b: [] for b in cat.objects}
        targets: list[float] = []
        eq_meta: list[tuple] = []
        t = 0
        kernel = arch.retraction.kernel
        for a in self.F:
            for s_idx, arr in enumerate(samples[a]):
                arr = np.asarray(arr, dtype=float)
                want = np.asarray(evaluate_at(target, a, arr))
                feats = {}
                for u in cat.incoming_arrows(a):
                    if cat.weight[u] == 0.0:
                        continue
                    b = cat.src(u)
                    z = transport_section_array(X, u, arr)
                    feats[u] = (b, carrier_features(X, arch.sigma, b, self.carriers[b], z))
                for y_idx, y in enumerate(Y.points(a)):
                    base_t = t
                    for i in range(Y.fiber_dim[a]):
                        targets.append(float(want[y_idx, i]))
                        eq_meta.append((a, s_idx, y_idx, i))
                        t += 1
                    for u, (b, phi_full) in feats.items():
                        q = X.tau_index(u, y_idx)
                        n = len(rows[b])
                        rows[b].append(phi_full[q])
                        wmat = cat.weight[u] * kernel.entry(u, y)  # (n_Y(a), n_Y(b))
                        for i in range(Y.fiber_dim[a]):
                            contrib[b].append((base_t + i, n, wmat[i]))

        self.T = t
        self.targets = np.array(targets)
        self.eq_meta = eq_meta
        self.PHI = {b: (np.array(v) if v else np.zeros((0, m))) for b, v in rows.items()}
        self.CONTRIB = {}
        for b in cat.objects:
            dense = np.zeros((self.T, self.PHI[b].shape[0], Y.fiber_dim[b]))
            for ti, n, wvec in contrib[b]:
                dense[ti, n] += wvec
            self.CONTRIB[b] = dense
        self.active = [b for b in cat.objects if self.PHI[b].shape[0] > 0]

        self.W = {b: rng.normal(scale=1.0, size=(w, m)) for b in cat.objects}
        self.d = {b: rng.normal(scale=0.3, size=w) for b in cat.objects}
        self.C = {b: np.zeros((Y.fiber_dim[b], m + w)) for b in cat.objects}
        self.c = {b: np.zeros(Y.fiber_dim[b]) for b in cat.objects}

    # -- forward pieces ----------------------------------------------------

    def _gfull(self, b):
        phi = self.PHI[b]
        if self.arch.width:
            hidden = self.arch.activation(phi @ self.W[b].T + self.d[b])
            return np.concatenate([phi, hidden], axis=1)
        return phi

    def predict(self) -> np.ndarray:
        pred = np.zeros(self.T)
        for b in self.active:
            V = self._gfull(b) @ self.C[b].T + self.c[b]
            pred += np.einsum("tnr,nr->t", self.CONTRIB[b], V)
        return pred

    def sup_error(self) -> float:
        """max over (object, sample, point) of the Euclidean fiber-norm error."""
        diff = self.predict() - self.targets
        worst = 0.0
        group: dict[tuple, float] = {}
        for val, (a, s, y, _i) in zip(diff, self.eq_meta):
            group[(a, s, y)] = group.get((a, s, y), 0.0) + val * val
        for v in group.values():
            worst = max(worst, float(np.sqrt(v)))
        return worst

    # -- linear stage --------------------------------------------------------

    def solve_linear(self) -> None:
        cols = []
        index = []
        for b in self.active:
            g = self._gfull(b)
            nb = self.Y.fiber_dim[b]
            for r in range(nb):
                for k in range(g.shape[1]):
                    cols.append(np.einsum("tn,n->t", self.CONTRIB[b][:, :, r], g[:, k]))
                    index.append((b, "C", r, k))
                cols.append(self.CONTRIB[b][:, :, r].sum(axis=1))
                index.append((b, "c", r, 0))
        if not cols:
            return
        D = np.stack(cols, axis=1)
        sol, *_ = np.linalg.lstsq(D, self.targets, rcond=None)
        for val, (b, kind, r, k) in zip(sol, index):
            if kind == "C":
                self.C[b][r, k] = val
            else:
                self.c[b][r] = val

    # -- gradients -----------------------------------------------------------

    def pack(self) -> np.ndarray:
        parts = []
        for b in self.active:
            parts += [self.W[b].ravel(), self.d[b].ravel(), self.C[b].ravel(), self.c[b].ravel()]
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, vec: np.ndarray) -> None:
        ofs = 0
        for b in self.active:
            for name in ("W", "d", "C", "c"):
                ref = getattr(self, name)[b]
                n = ref.size
                getattr(self, name)[b] = vec[ofs : ofs + n].reshape(ref.shape)
                ofs += n

    def loss_and_grad(self) -> tuple[float, np.ndarray]:
        """Mean squared loss over scalar equations and its analytic gradient."""
        m = self.arch.carriers
        pred = self.predict()
        resid = pred - self.targets
        loss = float(resid @ resid) / self.T
        gparts = []
        for b in self.active:
            phi = self.PHI[b]
            if self.arch.width:
                A = phi @ self.W[b].T + self.d[b]
                hidden = self.arch.activation(A)
                g = np.concatenate([phi, hidden], axis=1)
            else:
                A = None
                g = phi
            dV = np.einsum("t,tnr->nr", 2.0 * resid / self.T, self.CONTRIB[b])
            dC = dV.T @ g
            dc = dV.sum(axis=0)
            if self.arch.width:
                dg = dV @ self.C[b]
                dA = dg[:, m:] * self.arch.activation.derivative(A)
                dW = dA.T @ phi
                dd = dA.sum(axis=0)
            else:
                dW = np.zeros_like(self.W[b])
                dd = np.zeros_like(self.d[b])
            gparts += [dW.ravel(), dd.ravel(), dC.ravel(), dc.ravel()]
        return loss, (np.concatenate(gparts) if gparts else np.zeros(0))

    def gradient_step(self, step: float) -> None:
        _, grad = self.loss_and_grad()
        vec = self.pack() - step * grad
        self.unpack(vec)
        # the linear stage is re-solved after each step; keep C, c from lstsq
        self.solve_linear()

    def to_objectwise(self) -> GateMlpMap:
        params = {
            b: BlockParams(self.carriers[b], self.W[b].copy(), self.d[b].copy(),
                           self.C[b].copy(), self.c[b].copy())
            for b in self.cat.objects
        }
        return GateMlpMap(self.X, self.Y, self.arch.sigma, params, self.arch.activation)


def fit_cenn(
    target: NetworkSpec,
    arch: FitArchitecture,
    samples: dict[str, list[np.ndarray]],
    budget: FitBudget,
    seed: int,
) -> tuple[NetworkSpec, list[dict], FitState]:
    """Fit the free coefficients of the constructive approximator to a target.

    Returns the compiled best network, the per-iteration monotone-best error
    curve, and the fit state (for gradient diagnostics).  Non-convergence is
    visible in the curve; it is never silent.
    """
    state = FitState(arch, target, samples, seed)
    state.solve_linear()
    best_err = state.sup_error()
    best_vec = state.pack()
    curve = [{"iteration": 0, "sup_error": best_err}]
    if arch.width:
        for it in range(1, budget.iterations + 1):
            state.gradient_step(budget.step)
            err = state.sup_error()
            if err < best_err:
                best_err, best_vec = err, state.pack()
            curve.append({"iteration": it, "sup_error": best_err})
    state.unpack(best_vec)
    state.solve_linear()
    if state.sup_error() > best_err:
        state.unpack(best_vec)
    G = state.to_objectwise()
    net = compile_equivariant(arch.retraction, G, arch.X, name="fitted")
    return net, curve, state


# ---------------------------------------------------------------------------
# experiments and reporting

@dataclass
class UatExperiment:
    name: str
    rows: list[dict] = field(default_factory=list)
    basis_constants: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def best_curve(self) -> list[float]:
        best, out = np.inf, []
        for r in self.rows:
            best = min(best, r["sup_error"])
            out.append(best)
        return out


def basis_constant(q: int) -> float:
    """Norm-equivalence constant of the standard dual basis: the largest
    Euclidean norm over sign patterns of coordinates bounded by 1 (exact)."""
    return max(
        float(np.linalg.norm(np.array(signs))) for signs in itertools.product((-1.0, 1.0), repeat=q)
    )


def run_capacity_grid(
    target: NetworkSpec,
    retraction: Retraction,
    X: FeatureFunctor,
    sigma: ProbeFamily,
    samples: dict[str, list[np.ndarray]],
    carrier_grid: list[int],
    width_grid: list[int],
    budget: FitBudget,
    seed: int,
    name: str = "experiment",
    eqv_samples: int = 20,
) -> tuple[UatExperiment, NetworkSpec | None]:
    """Fit every capacity in the grid and record the monotone-best error curve."""
    exp = UatExperiment(name=name, seed=seed)
    Y = retraction.target
    exp.basis_constants = {a: basis_constant(Y.fiber_dim[a]) for a in sorted(samples)}
    rng = np.random.default_rng(seed)
    fuzz = [random_section(X, np.random.default_rng(int(rng.integers(1 << 31))))
            for _ in range(eqv_samples)]
    best_net, best_err = None, np.inf
    for m in carrier_grid:
        for w in width_grid:
            arch = FitArchitecture(retraction, X, sigma, m, w)
            t0 = time.perf_counter()
            net, _curve, _state = fit_cenn(target, arch, samples, budget, seed)
            dt = time.perf_counter() - t0
            st = _state
            err = st.sup_error()
            res = check_equivariance(net, X.cat, fuzz).max_residual
            exp.rows.append({
                "carriers": m, "width": w, "sup_error": err,
                "eqv_residual": res, "seed": seed, "runtime_s": dt,
            })
            if err < best_err:
                best_err, best_net = err, net
    return exp, best_net


CSV_COLUMNS = ["carriers", "width", "sup_error", "best_so_far", "eqv_residual", "seed", "runtime_s"]


def uat_report(exp: UatExperiment) -> tuple[str, str]:
    """Render an experiment as (CSV text, Markdown text).

    Floats are printed with 17 significant digits so reruns with identical
    seeds give byte-identical files.
    """
    lines = [",".join(CSV_COLUMNS)]
    best = np.inf
    md_rows = []
    for r in exp.rows:
        best = min(best, r["sup_error"])
        vals = [
            str(r["carriers"]), str(r["width"]),
            _fmt(r["sup_error"]), _fmt(best), _fmt(r["eqv_residual"]),
            str(r["seed"]), _fmt(r["runtime_s"]),
        ]
        lines.append(",".join(vals))
        md_rows.append("| " + " | ".join(vals) + " |")
    csv_text = "\n".join(lines) + "\n"
    md = [f"# {exp.name}", ""]
    if exp.basis_constants:
        consts = ", ".join(f"{a}: {_fmt(v)}" for a, v in sorted(exp.basis_constants.items()))
        md.append(f"Dual-basis assembly constants per object: {consts}")
        md.append("")
    md.append("| " + " | ".join(CSV_COLUMNS) + " |")
    md.append("|" + "---|" * len(CSV_COLUMNS))
    md += md_rows
    return csv_text, "\n".join(md) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def gradient_check(
    state: FitState, n_points: int = 20, seed: int = 0, step: float = 1e-5
) -> float:
    """Max relative error between analytic and central-difference gradients
    at seeded random parameter points."""
    rng = np.random.default_rng(seed)
    base = state.pack()
    worst = 0.0
    for _ in range(n_points):
        vec = base + rng.normal(scale=0.5, size=base.shape)
        state.unpack(vec)
        _, grad = state.loss_and_grad()
        fd = np.zeros_like(vec)
        for i in range(vec.size):
            for s, sign in ((step, 1.0), (-step, -1.0)):
                pert = vec.copy()
                pert[i] += s
                state.unpack(pert)
                loss, _ = state.loss_and_grad()
                fd[i] += sign * loss
        fd /= 2 * step
        denom = max(float(np.linalg.norm(grad)), float(np.linalg.norm(fd)), 1e-12)
        worst = max(worst, float(np.linalg.norm(grad - fd)) / denom)
    state.unpack(base)
    return worst
