import json

import numpy as np
import pytest

import catequiv as cq
from catequiv import documents as docs
from catequiv.cli import main
from catequiv.errors import DocumentError

from conftest import c2_pair


@pytest.fixture
def c2_files(tmp_path):
    cat, X, Y = c2_pair("trivial", "sign")
    docs.save_category(tmp_path / "cat.json", cat)
    docs.save_functor(tmp_path / "X.json", X)
    docs.save_functor(tmp_path / "Y.json", Y)
    return tmp_path, cat, X, Y


def test_category_roundtrip(c2_files, chain2):
    tmp, cat, _, _ = c2_files
    loaded = docs.load_category(tmp / "cat.json")
    assert loaded.objects == cat.objects
    assert loaded.composition == cat.composition
    assert loaded.weight == cat.weight
    docs.save_category(tmp / "chain.json", chain2)
    assert docs.load_category(tmp / "chain.json").arrow_order == chain2.arrow_order


def test_missing_weights_default_counting(tmp_path):
    doc = {
        "objects": ["a"], "arrows": [["id", "a", "a"]],
        "identities": {"a": "id"}, "composition": [["id", "id", "id"]],
    }
    (tmp_path / "cat.json").write_text(json.dumps(doc))
    cat = docs.load_category(tmp_path / "cat.json")
    assert cat.weight == {"id": 1.0}


def test_functor_section_kernel_roundtrip(c2_files):
    tmp, cat, X, Y = c2_files
    X2 = docs.load_functor(tmp / "X.json", cat)
    assert cq.validate_functor(cat, X2).ok
    x = cq.Section(X2, {"*": [[0.5]]})
    docs.save_section(tmp / "x.json", x)
    x2 = docs.load_section(tmp / "x.json", X2)
    assert np.array_equal(x2.data["*"], x.data["*"])

    system = cq.assemble_in_constraints(cat, X, Y, "IN")
    basis = cq.solve_parameter_space(system)
    docs.save_kernel_basis(tmp / "basis.json", basis, system)
    loaded = docs.load_kernel_basis(tmp / "basis.json", X, Y)
    assert len(loaded) == len(basis)
    assert np.allclose(loaded[0].entry("e", "*"), basis[0].entry("e", "*"))
    prov = json.loads((tmp / "basis.json.provenance.json").read_text())
    assert prov["unknowns"] == system.layout.size


def test_network_roundtrip(tmp_path):
    cat, X, _ = c2_pair("diag", "diag")
    ks = cq.solve_parameter_space(cq.assemble_in_constraints(cat, X, X, "IN"))
    chans = cq.solve_scalar_channels(cat, X)
    net = cq.NetworkSpec(
        cat,
        [cq.ConvLayer(ks[0]), cq.GateLayer(cq.Activation("tanh"), chans[0]), cq.ConvLayer(ks[1])],
        X, X,
    )
    docs.save_network(tmp_path / "net.json", net)
    loaded = docs.load_network(tmp_path / "net.json", cat)
    rng = np.random.default_rng(0)
    for _ in range(5):
        arr = rng.normal(size=(1, 2))
        assert np.allclose(cq.evaluate_at(net, "*", arr), cq.evaluate_at(loaded, "*", arr))


def test_malformed_document_raises(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(DocumentError):
        docs.load_category(tmp_path / "bad.json")
    (tmp_path / "empty.json").write_text("{}")
    with pytest.raises(DocumentError):
        docs.load_category(tmp_path / "empty.json")


# -- CLI -------------------------------------------------------------------------

def test_cli_validate_ok(c2_files, capsys):
    tmp, *_ = c2_files
    code = main(["validate", str(tmp / "cat.json"), "--functor", str(tmp / "X.json")])
    assert code == 0
    assert "valid" in capsys.readouterr().out


def test_cli_validate_catches_violation(tmp_path, capsys):
    cat = cq.build_poset_category(["0", "1"], [("0", "1")])
    cat.weight["0->1"] = -2.0
    docs.save_category(tmp_path / "bad.json", cat)
    assert main(["validate", str(tmp_path / "bad.json")]) == 1


def test_cli_malformed_input_exit2(tmp_path, capsys):
    (tmp_path / "nope.json").write_text("[1,2")
    code = main(["validate", str(tmp_path / "nope.json")])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "document"


def test_cli_solve_and_forward(c2_files, tmp_path, capsys):
    tmp, cat, X, Y = c2_files
    out = tmp / "basis.json"
    assert main(["solve", str(tmp / "cat.json"), str(tmp / "X.json"), str(tmp / "Y.json"),
                 "--regime", "IN", "-o", str(out)]) == 0
    loaded = docs.load_kernel_basis(out, X, Y)
    assert len(loaded) == 1  # trivial -> sign has a one-dim admissible space

    net = cq.NetworkSpec(cat, [cq.ConvLayer(loaded[0])], X, Y)
    docs.save_network(tmp / "net.json", net)
    docs.save_section(tmp / "x.json", cq.Section(X, {"*": [[0.25]]}))
    assert main(["forward", str(tmp / "net.json"), str(tmp / "cat.json"),
                 str(tmp / "x.json"), "-o", str(tmp / "y.json")]) == 0
    y = docs.load_section(tmp / "y.json", Y)
    direct = cq.conv_forward(loaded[0], cq.Section(X, {"*": [[0.25]]}))
    assert np.allclose(y.data["*"], direct.data["*"])
    manifest = json.loads((tmp / "y.json.manifest.json").read_text())
    assert manifest["command"] == "forward" and manifest["outputs"] == [str(tmp / "y.json")]


def test_cli_check_eqv(c2_files, tmp_path, capsys):
    tmp, cat, X, Y = c2_files
    main(["solve", str(tmp / "cat.json"), str(tmp / "X.json"), str(tmp / "Y.json"),
          "--regime", "IN", "-o", str(tmp / "basis.json")])
    basis = docs.load_kernel_basis(tmp / "basis.json", X, Y)
    net = cq.NetworkSpec(cat, [cq.ConvLayer(basis[0])], X, Y)
    docs.save_network(tmp / "net.json", net)
    assert main(["check-eqv", str(tmp / "net.json"), str(tmp / "cat.json"),
                 "--samples", "20", "--seed", "1"]) == 0
    # perturbed kernel fails with exit 1
    bad = cq.CategoryKernel(X, Y, {("e", "*"): [[1.0]], ("g1", "*"): [[1.0]]})
    docs.save_network(tmp / "bad.json", cq.NetworkSpec(cat, [cq.ConvLayer(bad)], X, Y))
    capsys.readouterr()
    assert main(["check-eqv", str(tmp / "bad.json"), str(tmp / "cat.json"),
                 "--samples", "20"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "equivariance_violated"


def test_cli_compile_haar(c2_files, tmp_path):
    tmp, cat, X, Y = c2_files
    gdoc = {"matrices": {"*": [[2.0]]}, "biases": {"*": [0.5]}}
    (tmp / "G.json").write_text(json.dumps(gdoc))
    assert main(["compile", str(tmp / "cat.json"), str(tmp / "X.json"), str(tmp / "G.json"),
                 "--retraction", "haar", "--target", str(tmp / "Y.json"),
                 "-o", str(tmp / "net.json")]) == 0
    net = docs.load_network(tmp / "net.json", cat)
    samples = [cq.random_section(net.input_functor, np.random.default_rng(i)) for i in range(30)]
    assert cq.check_equivariance(net, cat, samples).max_residual <= 1e-9


def test_cli_build_and_fit(tmp_path, capsys):
    spec = {
        "elements": ["e", "g1"],
        "mult": {"e|e": "e", "e|g1": "g1", "g1|e": "g1", "g1|g1": "e"},
        "rho_X": {"e": [[1.0]], "g1": [[-1.0]]},
        "rho_Y": {"e": [[1.0]], "g1": [[-1.0]]},
    }
    (tmp_path / "group.json").write_text(json.dumps(spec))
    assert main(["build", "group", str(tmp_path / "group.json"), "-o", str(tmp_path / "b")]) == 0
    cat = docs.load_category(tmp_path / "b" / "category.json")
    assert cq.validate_category(cat).ok

    cfg = {
        "category": str(tmp_path / "b" / "category.json"),
        "X": str(tmp_path / "b" / "X.json"),
        "Y": str(tmp_path / "b" / "Y.json"),
        "retraction": "haar", "probe": "id", "seed": 0,
        "samples": 16, "iterations": 40,
        "carrier_grid": [1, 2], "width_grid": [0, 4],
        "name": "cli-fit",
    }
    (tmp_path / "fit.json").write_text(json.dumps(cfg))
    capsys.readouterr()
    assert main(["fit", str(tmp_path / "fit.json"), "-o", str(tmp_path / "run")]) == 0
    csv_text = (tmp_path / "run" / "errors.csv").read_text()
    assert csv_text.splitlines()[0].startswith("carriers,width,sup_error")
    # determinism: rerun gives byte-identical CSV apart from runtime column
    main(["fit", str(tmp_path / "fit.json"), "-o", str(tmp_path / "run2")])
    strip = lambda text: ["," .join(line.split(",")[:-1]) for line in text.splitlines()]
    assert strip((tmp_path / "run2" / "errors.csv").read_text()) == strip(csv_text)

    assert main(["report", str(tmp_path / "run" / "errors.csv"),
                 "-o", str(tmp_path / "merged.md")]) == 0
    assert "cli-fit" not in (tmp_path / "merged.md").read_text()  # provenance is the path
    assert str(tmp_path / "run" / "errors.csv") in (tmp_path / "merged.md").read_text()


def test_cli_build_poset_and_neighbourhood(tmp_path):
    poset = {"elements": ["0", "1"], "relations": [["0", "1"]]}
    (tmp_path / "p.json").write_text(json.dumps(poset))
    assert main(["build", "poset", str(tmp_path / "p.json"), "-o", str(tmp_path / "pb")]) == 0

    tri = {
        "cells": [["v1", 0], ["v2", 0], ["v3", 0], ["e12", 1], ["e13", 1], ["e23", 1]],
        "faces": [["v1", "e12"], ["v2", "e12"], ["v1", "e13"], ["v3", "e13"],
                  ["v2", "e23"], ["v3", "e23"]],
        "k": 1, "d_X": 1, "d_Y": 1,
    }
    (tmp_path / "tri.json").write_text(json.dumps(tri))
    assert main(["build", "neighbourhood", str(tmp_path / "tri.json"),
                 "-o", str(tmp_path / "nb")]) == 0
    cat = docs.load_category(tmp_path / "nb" / "category.json")
    Xk = docs.load_functor(tmp_path / "nb" / "X.json", cat)
    assert cq.validate_functor(cat, Xk).ok
