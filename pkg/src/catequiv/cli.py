"""Batch command-line surface over the library.

Subcommands: validate, solve, forward, check-eqv, compile, build, fit,
report.  Exit code 0 means clean, 1 means a check was violated, 2 means
malformed input; failures emit a machine-readable JSON object on stderr.
Every run writes a manifest next to its outputs recording inputs (with
hashes), resolved configuration, outputs, and wall-clock time.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, builders, documents as docs, uat
from .category import check_measure_properties, validate_category
from .compilation import build_graded_target, build_haar_retraction, compile_equivariant
from .errors import DocumentError, EngineError
from .functors import ProbeFamily, random_section, tau_probe, validate_functor
from .kernels import (
    assemble_in_constraints,
    solve_natural_bias,
    solve_parameter_space,
    solve_scalar_channels,
    solve_steerable_space,
)
from .layers import AffineMap, check_equivariance, network_forward

DEFAULT_TOL = 1e-9
DEFAULT_RANK_TOL = 1e-10


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fail(kind: str, module: str, message: str, witness=None, code: int = 2) -> int:
    payload = {"error": kind, "module": module, "message": message}
    if witness is not None:
        payload["witness"] = witness
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _manifest(command: str, args, inputs: list[str], outputs: list[str],
              config: dict, t0: float, manifest_path: str | None) -> None:
    if manifest_path is None:
        return
    doc = {
        "command": command,
        "inputs": {p: docs.sha256_of(p) for p in inputs if Path(p).exists()},
        "config": config,
        "outputs": outputs,
        "wall_clock_s": time.perf_counter() - t0,
        "engine_version": __version__,
    }
    docs._write(manifest_path, doc)


def _out_manifest(args) -> str | None:
    out = getattr(args, "output", None)
    if out is None:
        return None
    return str(out) + ".manifest.json"


# -- subcommands -----------------------------------------------------------------

def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    cat = docs.load_category(args.category)
    reports = [validate_category(cat)]
    for fpath in args.functor or []:
        reports.append(validate_functor(cat, docs.load_functor(fpath, cat)))
    if args.measure:
        reports.append(check_measure_properties(cat, args.measure))
    clean = all(r.ok for r in reports)
    for r in reports:
        print(r)
    _manifest("validate", args, [args.category] + (args.functor or []), [],
              {"measure": args.measure}, t0, None)
    return 0 if clean else 1


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    cat = docs.load_category(args.category)
    Z = docs.load_functor(args.source, cat)
    Zp = docs.load_functor(args.target, cat) if args.target else Z
    out = Path(args.output)
    inputs = [args.category, args.source] + ([args.target] if args.target else [])
    if args.regime in ("IN", "IN_bundle", "IN_probe"):
        sigma = None
        if args.sigma:
            sigma = docs.load_probe(args.sigma)
            inputs.append(args.sigma)
        elif args.regime == "IN_probe":
            sigma = tau_probe(Z)
        system = assemble_in_constraints(cat, Z, Zp, args.regime, sigma)
        basis = solve_parameter_space(system, args.rank_tol)
        docs.save_kernel_basis(out, basis, system)
        print(f"{len(basis)} basis kernel(s) -> {out}")
    elif args.regime == "steerable":
        basis = solve_steerable_space(cat, Z, Zp)
        docs.save_kernel_basis(out, basis)
        print(f"{len(basis)} steerable basis kernel(s) -> {out}")
    elif args.regime == "bias":
        fields = solve_natural_bias(cat, Zp)
        docs._write(out, {"kind": "bias_basis",
                          "fields": [{a: v.tolist() for a, v in f.items()} for f in fields]})
        print(f"{len(fields)} natural bias field(s) -> {out}")
    elif args.regime == "channels":
        chans = solve_scalar_channels(cat, Z)
        docs._write(out, {"kind": "channel_basis",
                          "channels": [{a: m.tolist() for a, m in ch.matrices.items()} for ch in chans]})
        print(f"{len(chans)} natural scalar channel(s) -> {out}")
    else:
        return _fail("bad_regime", "cli", f"unknown regime {args.regime}")
    _manifest("solve", args, inputs, [str(out)],
              {"regime": args.regime, "rank_tol": args.rank_tol}, t0, _out_manifest(args))
    return 0


def cmd_forward(args) -> int:
    t0 = time.perf_counter()
    cat = docs.load_category(args.category)
    net = docs.load_network(args.network, cat)
    x = docs.load_section(args.section, net.input_functor)
    y = network_forward(net, x)
    docs.save_section(args.output, y)
    print(f"forward -> {args.output}")
    _manifest("forward", args, [args.category, args.network, args.section],
              [args.output], {}, t0, _out_manifest(args))
    return 0


def cmd_check_eqv(args) -> int:
    t0 = time.perf_counter()
    cat = docs.load_category(args.category)
    net = docs.load_network(args.network, cat)
    rng = np.random.default_rng(args.seed)
    samples = [
        random_section(net.input_functor, np.random.default_rng(int(rng.integers(1 << 31))))
        for _ in range(args.samples)
    ]
    report = check_equivariance(net, cat, samples, args.tol)
    lines = ["arrow,residual"]
    lines += [f"{w},{_fmt(r)}" for w, r in sorted(report.per_arrow.items())]
    lines.append(f"max,{_fmt(report.max_residual)}")
    table = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(table)
    print(table, end="")
    _manifest("check-eqv", args, [args.category, args.network],
              [args.output] if args.output else [],
              {"samples": args.samples, "tol": args.tol, "seed": args.seed}, t0,
              _out_manifest(args))
    if report.max_residual > args.tol:
        return _fail("equivariance_violated", "layers",
                     f"max residual {report.max_residual:.3g} > tol {args.tol:.3g}",
                     witness=list(report.witness or ()), code=1)
    return 0


def cmd_compile(args) -> int:
    t0 = time.perf_counter()
    cat = docs.load_category(args.category)
    X = docs.load_functor(args.source, cat)
    inputs = [args.category, args.source, args.maps]
    if args.retraction == "haar":
        Y = docs.load_functor(args.target, cat)
        inputs.append(args.target)
        R = build_haar_retraction(cat, Y)
    else:
        u_dims = docs._read(args.u_dims)
        inputs.append(args.u_dims)
        Y, R = build_graded_target(cat, {k: int(v) for k, v in u_dims.items()})
    gdoc = docs._read(args.maps)
    G = AffineMap(
        X, Y,
        {a: np.asarray(m, float) for a, m in gdoc["matrices"].items()},
        None if gdoc.get("biases") is None
        else {a: np.asarray(v, float) for a, v in gdoc["biases"].items()},
    )
    net = compile_equivariant(R, G, X)
    docs.save_network(args.output, net)
    print(f"compiled network -> {args.output}")
    _manifest("compile", args, inputs, [args.output],
              {"retraction": args.retraction}, t0, _out_manifest(args))
    return 0


def cmd_build(args) -> int:
    t0 = time.perf_counter()
    spec = docs._read(args.spec)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = []

    def emit(name, saver, obj):
        path = outdir / name
        saver(path, obj)
        outputs.append(str(path))

    if args.kind == "group":
        cat, X, Y = builders.build_group_category(
            spec["elements"], {tuple(k.split("|")): v for k, v in spec["mult"].items()},
            spec.get("omega"),
            None if "action" not in spec else {tuple(k.split("|")): v for k, v in spec["action"].items()},
            None if "rho_X" not in spec else {g: np.asarray(m, float) for g, m in spec["rho_X"].items()},
            None if "rho_Y" not in spec else {g: np.asarray(m, float) for g, m in spec["rho_Y"].items()},
        )
        emit("category.json", docs.save_category, cat)
        emit("X.json", docs.save_functor, X)
        emit("Y.json", docs.save_functor, Y)
    elif args.kind == "action-groupoid":
        cat = builders.build_action_groupoid(
            spec["elements"], {tuple(k.split("|")): v for k, v in spec["mult"].items()},
            spec["omega"], {tuple(k.split("|")): v for k, v in spec["action"].items()},
        )
        emit("category.json", docs.save_category, cat)
    elif args.kind == "poset":
        cat = builders.build_poset_category(spec["elements"], [tuple(r) for r in spec["relations"]])
        emit("category.json", docs.save_category, cat)
    elif args.kind == "face":
        cx = builders.CWComplex([tuple(c) for c in spec["cells"]], [tuple(f) for f in spec["faces"]])
        cat = builders.build_face_category(cx, spec.get("include_bottom", True))
        emit("category.json", docs.save_category, cat)
    elif args.kind == "neighbourhood":
        cx = builders.CWComplex([tuple(c) for c in spec["cells"]], [tuple(f) for f in spec["faces"]])
        k = int(spec.get("k", 1))
        gpd = builders.build_neighbourhood_groupoid(cx, k)
        X_k, Y_k = builders.build_neighbourhood_functors(
            cx, k, gpd, int(spec.get("d_X", 1)), int(spec.get("d_Y", 1)))
        emit("category.json", docs.save_category, gpd)
        emit("X.json", docs.save_functor, X_k)
        emit("Y.json", docs.save_functor, Y_k)
    else:
        return _fail("bad_kind", "cli", f"unknown build kind {args.kind}")
    print("\n".join(outputs))
    _manifest("build", args, [args.spec], outputs, {"kind": args.kind}, t0,
              str(outdir / "manifest.json"))
    return 0


def cmd_fit(args) -> int:
    t0 = time.perf_counter()
    cfg = docs._read(args.config)
    cat = docs.load_category(cfg["category"])
    X = docs.load_functor(cfg["X"], cat)
    inputs = [args.config, cfg["category"], cfg["X"]]
    if cfg.get("retraction", "haar") == "haar":
        Y = docs.load_functor(cfg["Y"], cat)
        inputs.append(cfg["Y"])
        R = build_haar_retraction(cat, Y)
    else:
        Y, R = build_graded_target(cat, {k: int(v) for k, v in cfg["u_dims"].items()})
    sigma = tau_probe(X) if cfg.get("probe", "tau") == "tau" else ProbeFamily(
        {u: {p: p for p in X.base[cat.tgt(u)]} for u in cat.arrow_order})
    seed = int(cfg.get("seed", 0))
    target = uat.sample_equivariant_target(R, X, seed)
    rng = np.random.default_rng(seed + 1)
    n_samples = int(cfg.get("samples", 48))
    objects = cfg.get("objects", cat.objects)
    samples = {
        a: [rng.uniform(-1, 1, size=(X.n_points(a), X.fiber_dim[a])) for _ in range(n_samples)]
        for a in objects
    }
    budget = uat.FitBudget(int(cfg.get("iterations", 300)), float(cfg.get("step", 0.2)))
    exp, best = uat.run_capacity_grid(
        target, R, X, sigma, samples,
        [int(c) for c in cfg.get("carrier_grid", [1, 2, 4, 8])],
        [int(w) for w in cfg.get("width_grid", [0, 4, 8])],
        budget, seed, name=cfg.get("name", "fit"),
    )
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_text, md_text = uat.uat_report(exp)
    (outdir / "errors.csv").write_text(csv_text)
    (outdir / "report.md").write_text(md_text)
    outputs = [str(outdir / "errors.csv"), str(outdir / "report.md")]
    print(csv_text, end="")
    _manifest("fit", args, inputs, outputs, cfg, t0, str(outdir / "manifest.json"))
    return 0


def cmd_report(args) -> int:
    t0 = time.perf_counter()
    rows = []
    for path in args.csv:
        lines = Path(path).read_text().strip().splitlines()
        header = lines[0].split(",")
        for line in lines[1:]:
            rows.append((path, dict(zip(header, line.split(",")))))
    cols = ["provenance"] + (list(rows[0][1]) if rows else [])
    md = ["# merged run report", "", "| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for src, row in rows:
        md.append("| " + " | ".join([src] + [row.get(c, "") for c in cols[1:]]) + " |")
    text = "\n".join(md) + "\n"
    Path(args.output).write_text(text)
    print(f"report -> {args.output}")
    _manifest("report", args, list(args.csv), [args.output], {}, t0, _out_manifest(args))
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="catequiv", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="validate category/functor documents")
    v.add_argument("category")
    v.add_argument("--functor", action="append")
    v.add_argument("--measure", choices=["nsp", "left_coherent", "bi_coherent"])
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="solve admissible kernels/biases/channels")
    s.add_argument("category")
    s.add_argument("source")
    s.add_argument("target", nargs="?")
    s.add_argument("--regime", default="IN",
                   choices=["IN", "IN_bundle", "IN_probe", "steerable", "bias", "channels"])
    s.add_argument("--sigma")
    s.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("forward", help="run a network on a section document")
    f.add_argument("network")
    f.add_argument("category")
    f.add_argument("section")
    f.add_argument("-o", "--output", required=True)
    f.set_defaults(func=cmd_forward)

    c = sub.add_parser("check-eqv", help="fuzz naturality residuals of a network")
    c.add_argument("network")
    c.add_argument("category")
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--tol", type=float, default=DEFAULT_TOL)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_check_eqv)

    k = sub.add_parser("compile", help="compile objectwise affine maps through a retraction")
    k.add_argument("category")
    k.add_argument("source", help="input functor document")
    k.add_argument("maps", help="objectwise affine maps document")
    k.add_argument("--retraction", choices=["haar", "graded"], default="haar")
    k.add_argument("--target", help="target functor document (haar)")
    k.add_argument("--u-dims", help="summand dims document (graded)")
    k.add_argument("-o", "--output", required=True)
    k.set_defaults(func=cmd_compile)

    b = sub.add_parser("build", help="build categories/functors from structure specs")
    b.add_argument("kind", choices=["group", "action-groupoid", "poset", "face", "neighbourhood"])
    b.add_argument("spec")
    b.add_argument("-o", "--output", required=True)
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("fit", help="run a capacity-grid approximation experiment")
    t.add_argument("config")
    t.add_argument("-o", "--output", required=True)
    t.set_defaults(func=cmd_fit)

    r = sub.add_parser("report", help="merge error CSVs into a Markdown report")
    r.add_argument("csv", nargs="+")
    r.add_argument("-o", "--output", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DocumentError as exc:
        return _fail("document", "documents", str(exc))
    except EngineError as exc:
        return _fail(type(exc).__name__, exc.__class__.__module__.split(".")[-1], str(exc))


if __name__ == "__main__":
    sys.exit(main())
