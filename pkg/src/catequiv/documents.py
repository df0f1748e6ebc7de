"""JSON document formats for categories, functors, sections, kernels, networks.

All documents are UTF-8 JSON.  Keys follow the external interface contracts:
category documents carry ``objects``, ``arrows``, ``identities``,
``composition`` (a list of ``[f, g, f∘g]`` triples) and optional ``weights``
(missing means counting measure); kernel entries are keyed
``"arrow_id@point_id"`` with row-major matrices.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .category import FiniteCategory
from .errors import DocumentError
from .functors import FeatureFunctor, ProbeFamily, Section
from .kernels import CategoryKernel, ConstraintSystem, ScalarChannel
from .layers import (
    Activation,
    AffineMap,
    BundleConvLayer,
    ComponentwiseLayer,
    ConvLayer,
    GateLayer,
    LiftLayer,
    NetworkSpec,
)


def _read(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DocumentError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: invalid JSON ({exc})") from None


def _write(path, doc: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _require(doc: dict, keys: list[str], what: str) -> None:
    for k in keys:
        if k not in doc:
            raise DocumentError(f"{what} document missing key {k!r}")


# -- categories ---------------------------------------------------------------

def category_to_doc(cat: FiniteCategory) -> dict:
    return {
        "objects": cat.objects,
        "arrows": [[a.arrow_id, a.src, a.tgt] for a in (cat.arrows[u] for u in cat.arrow_order)],
        "identities": cat.identities,
        "composition": sorted([f, g, h] for (f, g), h in cat.composition.items()),
        "weights": cat.weight,
    }


def category_from_doc(doc: dict) -> FiniteCategory:
    _require(doc, ["objects", "arrows", "identities", "composition"], "category")
    arrows = [tuple(a) if isinstance(a, list) else (a["id"], a["src"], a["tgt"]) for a in doc["arrows"]]
    comp = {}
    for triple in doc["composition"]:
        if len(triple) != 3:
            raise DocumentError(f"composition entry {triple!r} is not a triple")
        f, g, h = triple
        comp[(f, g)] = h
    return FiniteCategory(doc["objects"], arrows, doc["identities"], comp, doc.get("weights"))


def save_category(path, cat: FiniteCategory) -> None:
    _write(path, category_to_doc(cat))


def load_category(path) -> FiniteCategory:
    return category_from_doc(_read(path))


# -- functors -----------------------------------------------------------------

def functor_to_doc(F: FeatureFunctor) -> dict:
    return {
        "name": F.name,
        "base": F.base,
        "fiber_dim": F.fiber_dim,
        "tau": F.tau,
        "pi": F.pi,
        "L": {u: m.tolist() for u, m in F.L.items()},
    }


def functor_from_doc(cat: FiniteCategory, doc: dict) -> FeatureFunctor:
    _require(doc, ["base", "fiber_dim", "tau", "pi", "L"], "functor")
    return FeatureFunctor(
        cat, doc["base"], doc["fiber_dim"], doc["tau"], doc["pi"],
        {u: np.asarray(m, dtype=float) for u, m in doc["L"].items()},
        name=doc.get("name", ""),
    )


def save_functor(path, F: FeatureFunctor) -> None:
    _write(path, functor_to_doc(F))


def load_functor(path, cat: FiniteCategory) -> FeatureFunctor:
    return functor_from_doc(cat, _read(path))


# -- sections and probes --------------------------------------------------------

def save_section(path, x: Section) -> None:
    _write(path, {a: v.tolist() for a, v in x.data.items()})


def load_section(path, F: FeatureFunctor) -> Section:
    doc = _read(path)
    return Section(F, {a: np.asarray(v, dtype=float) for a, v in doc.items()})


def save_probe(path, sigma: ProbeFamily) -> None:
    _write(path, sigma.sigma)


def load_probe(path) -> ProbeFamily:
    return ProbeFamily(_read(path))


# -- kernels ------------------------------------------------------------------

def kernel_to_doc(kernel: CategoryKernel) -> dict:
    doc = {
        "regime": kernel.regime,
        "name": kernel.name,
        "entries": {f"{u}@{y}": m.tolist() for (u, y), m in sorted(kernel.entries.items())},
    }
    if kernel.bias is not None:
        doc["bias"] = {a: v.tolist() for a, v in kernel.bias.items()}
    return doc


def kernel_from_doc(doc: dict, source: FeatureFunctor, target: FeatureFunctor) -> CategoryKernel:
    _require(doc, ["entries"], "kernel")
    entries = {}
    for key, mat in doc["entries"].items():
        if "@" not in key:
            raise DocumentError(f"kernel entry key {key!r} is not 'arrow@point'")
        u, y = key.rsplit("@", 1)
        entries[(u, y)] = np.asarray(mat, dtype=float)
    bias = None
    if "bias" in doc and doc["bias"] is not None:
        bias = {a: np.asarray(v, dtype=float) for a, v in doc["bias"].items()}
    return CategoryKernel(source, target, entries, bias,
                          doc.get("regime", "unconstrained"), doc.get("name", ""))


def save_kernel_basis(path, kernels: list[CategoryKernel], system: ConstraintSystem | None = None) -> None:
    doc = {
        "kind": "kernel_basis",
        "count": len(kernels),
        "kernels": [kernel_to_doc(k) for k in kernels],
    }
    _write(path, doc)
    if system is not None:
        side = {
            "kind": system.kind,
            "rows": len(system.row_provenance),
            "unknowns": system.layout.size,
            "row_provenance": [list(map(str, p)) for p in system.row_provenance],
        }
        _write(str(path) + ".provenance.json", side)


def load_kernel_basis(path, source: FeatureFunctor, target: FeatureFunctor) -> list[CategoryKernel]:
    doc = _read(path)
    _require(doc, ["kernels"], "kernel basis")
    return [kernel_from_doc(k, source, target) for k in doc["kernels"]]


# -- networks -------------------------------------------------------------------

def network_to_doc(net: NetworkSpec) -> dict:
    functors: dict[str, dict] = {}

    def reg(F: FeatureFunctor) -> str:
        key = F.name or f"functor{len(functors)}"
        while key in functors and functors[key] != functor_to_doc(F):
            key += "'"
        functors[key] = functor_to_doc(F)
        return key

    layers = []
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            layers.append({
                "type": "conv",
                "source": reg(layer.kernel.source), "target": reg(layer.kernel.target),
                "kernel": kernel_to_doc(layer.kernel),
            })
        elif isinstance(layer, GateLayer):
            layers.append({
                "type": "gate",
                "activation": {"kind": layer.activation.kind, "slope": layer.activation.slope},
                "functor": reg(layer.channel.functor),
                "channel": {a: m.tolist() for a, m in layer.channel.matrices.items()},
            })
        elif isinstance(layer, LiftLayer):
            layers.append({"type": "lift", "functor": reg(layer.functor)})
        elif isinstance(layer, BundleConvLayer):
            entry = {
                "type": "bundle_conv",
                "source": reg(layer.kernel.source), "target": reg(layer.kernel.target),
                "kernel": kernel_to_doc(layer.kernel),
            }
            if layer.probe is not None:
                entry["probe"] = layer.probe.sigma
            layers.append(entry)
        elif isinstance(layer, ComponentwiseLayer) and isinstance(layer.maps, AffineMap):
            layers.append({
                "type": "componentwise_affine",
                "source": reg(layer.maps.source), "target": reg(layer.maps.target),
                "matrices": {a: m.tolist() for a, m in layer.maps.matrices.items()},
                "biases": None if layer.maps.biases is None
                else {a: v.tolist() for a, v in layer.maps.biases.items()},
            })
        else:
            raise DocumentError(
                f"layer type {type(layer).__name__} has no document form "
                "(componentwise maps other than affine are runtime objects)"
            )
    return {
        "format": "catequiv/network-v1",
        "name": net.name,
        "functors": functors,
        "input": reg(net.input_functor),
        "output": reg(net.output_functor),
        "layers": layers,
    }


def network_from_doc(doc: dict, cat: FiniteCategory) -> NetworkSpec:
    _require(doc, ["functors", "layers", "input", "output"], "network")
    functors = {name: functor_from_doc(cat, fdoc) for name, fdoc in doc["functors"].items()}

    def fget(name: str) -> FeatureFunctor:
        if name not in functors:
            raise DocumentError(f"network references unknown functor {name!r}")
        return functors[name]

    layers = []
    for entry in doc["layers"]:
        kind = entry.get("type")
        if kind == "conv":
            layers.append(ConvLayer(kernel_from_doc(entry["kernel"], fget(entry["source"]), fget(entry["target"]))))
        elif kind == "gate":
            act = Activation(entry["activation"]["kind"], entry["activation"].get("slope", 0.01))
            chan = ScalarChannel(fget(entry["functor"]),
                                 {a: np.asarray(m, float) for a, m in entry["channel"].items()})
            layers.append(GateLayer(act, chan))
        elif kind == "lift":
            layers.append(LiftLayer(fget(entry["functor"])))
        elif kind == "bundle_conv":
            kernel = kernel_from_doc(entry["kernel"], fget(entry["source"]), fget(entry["target"]))
            probe = ProbeFamily(entry["probe"]) if "probe" in entry else None
            layers.append(BundleConvLayer(kernel, probe))
        elif kind == "componentwise_affine":
            src, tgt = fget(entry["source"]), fget(entry["target"])
            maps = AffineMap(
                src, tgt,
                {a: np.asarray(m, float) for a, m in entry["matrices"].items()},
                None if entry.get("biases") is None
                else {a: np.asarray(v, float) for a, v in entry["biases"].items()},
            )
            layers.append(ComponentwiseLayer(maps, tgt))
        else:
            raise DocumentError(f"unknown layer type {kind!r}")
    return NetworkSpec(cat, layers, fget(doc["input"]), fget(doc["output"]),
                       name=doc.get("name", ""))


def save_network(path, net: NetworkSpec) -> None:
    _write(path, network_to_doc(net))


def load_network(path, cat: FiniteCategory) -> NetworkSpec:
    return network_from_doc(_read(path), cat)
