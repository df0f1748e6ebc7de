import numpy as np
import pytest

import catequiv as cq
from catequiv import uat
from catequiv.errors import LayerError

from conftest import c2_pair


def c2_setting():
    cat, X, Y = c2_pair("sign", "sign")
    R = cq.build_haar_retraction(cat, Y)
    sigma = cq.identity_probe(X)
    return cat, X, Y, R, sigma


def chain_setting():
    chain = cq.build_poset_category(["0", "1"], [("0", "1")])
    X = cq.identity_functor(chain, 1)
    Y, R = cq.build_graded_target(chain, {"0": 1, "1": 1})
    sigma = cq.tau_probe(X)
    return chain, X, Y, R, sigma


# -- carriers ---------------------------------------------------------------

def test_identity_carrier_projects_coordinate():
    cat, X, _ = c2_pair("diag", "diag")
    sigma = cq.identity_probe(X)
    frag = uat.build_carrier_block(X, "*", "e", np.array([1.0, 0.0]), 1.0, sigma)
    out = cq.evaluate_at(frag, "*", np.array([[0.3, 0.9]]))
    assert np.allclose(out, [[0.3]])


def test_sign_carrier_negates():
    cat, X, Y, R, sigma = c2_setting()
    frag = uat.build_carrier_block(X, "*", "g1", np.array([1.0]), 1.0, sigma)
    assert np.allclose(cq.evaluate_at(frag, "*", np.array([[0.7]])), [[-0.7]])


def test_one_hot_base_weight():
    els, mult = cq.cyclic_group(2)
    action = {("e", "p"): "p", ("e", "q"): "q", ("g1", "p"): "q", ("g1", "q"): "p"}
    cat, X, _ = cq.build_group_category(els, mult, omega=["p", "q"], action=action)
    sigma = cq.identity_probe(X)
    frag = uat.build_carrier_block(X, "*", "e", np.array([1.0]), np.array([1.0, 0.0]), sigma)
    out = cq.evaluate_at(frag, "*", np.array([[0.5], [0.8]]))
    assert np.allclose(out, [[0.5], [0.0]])  # supported at the first base point


def test_zero_weight_dirac_rejected():
    cat, X, Y, R, sigma = c2_setting()
    cat.weight["g1"] = 0.0
    with pytest.raises(LayerError):
        uat.build_carrier_block(X, "*", "g1", np.array([1.0]), 1.0, sigma)


def test_carrier_formula_oracle():
    # direct evaluation of eta(y)<ell, (X(u)x)(sigma_u y)> vs the fragment
    els, mult = cq.cyclic_group(3)
    rho = cq.regular_representation(els, mult)
    cat, X, _ = cq.build_group_category(els, mult, rho_X=rho)
    sigma = cq.identity_probe(X)
    rng = np.random.default_rng(0)
    ell = rng.normal(size=3)
    for u0 in cat.arrow_order:
        frag = uat.build_carrier_block(X, "*", u0, ell, 1.0, sigma)
        x = rng.normal(size=(1, 3))
        got = cq.evaluate_at(frag, "*", x)[0, 0]
        want = float(ell @ cq.transport_section_array(X, u0, x)[0])
        assert abs(got - want) <= 1e-12


# -- affine blocks and gate-MLP ------------------------------------------------

def test_affine_block_examples(chain2):
    F = cq.identity_functor(chain2, 1)
    stack = cq.scalar_stack(F, 3)
    proj = uat.build_affine_block(stack, np.array([[1.0, 0.0, 0.0]]))
    out = cq.evaluate_at(proj, "1", np.array([[2.0, 5.0, 7.0]]))
    assert np.allclose(out, [[2.0]])

    cancel = uat.build_affine_block(cq.scalar_stack(F, 2), np.array([[1.0, 1.0]]))
    assert np.allclose(cq.evaluate_at(cancel, "0", np.array([[3.0, -3.0]])), [[0.0]])

    rng = np.random.default_rng(1)
    M, b = rng.normal(size=(2, 3)), rng.normal(size=2)
    aff = uat.build_affine_block(stack, M, b)
    z = rng.normal(size=(1, 3))
    assert np.abs(cq.evaluate_at(aff, "0", z) - (M @ z[0] + b)).max() <= 1e-12


def test_affine_block_width_mismatch(chain2):
    F = cq.identity_functor(chain2, 1)
    stack = cq.scalar_stack(F, 3)
    with pytest.raises(LayerError):
        uat.build_affine_block(cq.scalar_stack(F, 2), np.zeros((1, 3)))
        raise LayerError("unreached")  # pragma: no cover
    with pytest.raises(LayerError):
        bad = uat.build_affine_block(stack, np.zeros((1, 2)))


def test_affine_block_is_natural(chain2):
    F = cq.identity_functor(chain2, 1)
    stack = cq.scalar_stack(F, 2)
    aff = uat.build_affine_block(stack, np.array([[1.0, 2.0], [0.5, -1.0]]), np.array([0.1, 0.2]))
    samples = [cq.random_section(stack, np.random.default_rng(i)) for i in range(20)]
    assert cq.check_equivariance(aff, chain2, samples).max_residual <= 1e-9


def test_gate_mlp_depth0_is_affine():
    cat, X, Y, R, sigma = c2_setting()
    stack = cq.scalar_stack(X, 2)
    rng = np.random.default_rng(2)
    W, b = rng.normal(size=(1, 2)), rng.normal(size=1)
    frag = uat.build_gate_mlp(stack, [(W, b)])
    z = rng.normal(size=(1, 2))
    assert np.abs(cq.evaluate_at(frag, "*", z) - (W @ z[0] + b)).max() <= 1e-12


def test_gate_mlp_single_relu_unit():
    cat, X, Y, R, sigma = c2_setting()
    stack = cq.scalar_stack(X, 1)
    weights = [(np.array([[1.0]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0]))]
    frag = uat.build_gate_mlp(stack, weights, cq.Activation("relu"))
    for v in (-2.0, -0.1, 0.0, 0.4, 3.0):
        got = cq.evaluate_at(frag, "*", np.array([[v]]))[0, 0]
        assert got == max(v, 0.0)


def test_gate_mlp_matches_reference():
    cat, X, Y, R, sigma = c2_setting()
    stack = cq.scalar_stack(X, 3)
    rng = np.random.default_rng(3)
    weights = [
        (rng.normal(size=(5, 3)), rng.normal(size=5)),
        (rng.normal(size=(4, 5)), rng.normal(size=4)),
        (rng.normal(size=(1, 4)), rng.normal(size=1)),
    ]
    frag = uat.build_gate_mlp(stack, weights, uat.TANH)
    for _ in range(10):
        z = rng.normal(size=(1, 3))
        got = cq.evaluate_at(frag, "*", z)[0]
        want = uat.mlp_reference(weights, uat.TANH, z[0])
        assert np.abs(got - want).max() <= 1e-12


def test_gate_gadget_lipschitz():
    # measured quotient of the activation gadget never exceeds Lip(alpha) = 1
    cat, X, Y, R, sigma = c2_setting()
    stack = cq.scalar_stack(X, 2)
    from catequiv.uat import coordinatewise_activation

    frag = coordinatewise_activation(stack, uat.TANH)
    rng = np.random.default_rng(4)
    pairs = [(rng.normal(size=(1, 2)), rng.normal(size=(1, 2))) for _ in range(50)]
    assert cq.measure_lipschitz_quotients(frag, "*", pairs) <= 1.0 + 1e-12


def test_gate_mlp_fragment_is_natural():
    cat, X, _ = c2_pair("diag", "diag")
    stack = cq.scalar_stack(X, 2)
    rng = np.random.default_rng(5)
    weights = [(rng.normal(size=(3, 2)), rng.normal(size=3)),
               (rng.normal(size=(2, 3)), rng.normal(size=2))]
    frag = uat.build_gate_mlp(stack, weights, uat.TANH)
    samples = [cq.random_section(stack, np.random.default_rng(i)) for i in range(20)]
    assert cq.check_equivariance(frag, cat, samples).max_residual <= 1e-9


# -- targets and fitting ------------------------------------------------------

def test_sampled_target_is_equivariant_and_odd():
    cat, X, Y, R, sigma = c2_setting()
    target = uat.sample_equivariant_target(R, X, seed=0)
    samples = [cq.random_section(X, np.random.default_rng(i)) for i in range(50)]
    assert cq.check_equivariance(target, cat, samples).max_residual <= 1e-9
    for s in samples[:10]:
        plus = cq.evaluate_at(target, "*", s.data["*"])
        minus = cq.evaluate_at(target, "*", -s.data["*"])
        assert np.abs(plus + minus).max() <= 1e-12  # odd map for the sign rep


def test_identity_family_compiles_to_identity():
    cat, X, Y, R, sigma = c2_setting()
    G = cq.AffineMap(Y, Y, {"*": np.eye(1)})
    net = cq.compile_equivariant(R, G, Y)
    x = cq.random_section(Y, np.random.default_rng(0))
    assert np.abs(cq.evaluate_at(net, "*", x.data["*"]) - x.data["*"]).max() <= 1e-12


def test_fit_recovers_in_class_conv():
    cat, X, Y, R, sigma = c2_setting()
    ks = cq.solve_parameter_space(cq.assemble_in_constraints(cat, X, Y, "IN"))
    target = cq.NetworkSpec(cat, [cq.ConvLayer(ks[0].scaled(1.7))], X, Y)
    rng = np.random.default_rng(0)
    samples = {"*": [rng.uniform(-1, 1, (1, 1)) for _ in range(32)]}
    arch = uat.FitArchitecture(R, X, sigma, carriers=2, width=0)
    net, curve, state = uat.fit_cenn(target, arch, samples, uat.FitBudget(), seed=0)
    assert state.sup_error() <= 1e-6


def test_fit_zero_target_is_exact():
    cat, X, Y, R, sigma = c2_setting()
    zero = cq.NetworkSpec(cat, [], X, X)
    zero_kernel = cq.CategoryKernel(X, Y, {}, regime="IN")
    target = cq.NetworkSpec(cat, [cq.ConvLayer(zero_kernel)], X, Y)
    samples = {"*": [np.random.default_rng(i).uniform(-1, 1, (1, 1)) for i in range(8)]}
    arch = uat.FitArchitecture(R, X, sigma, carriers=1, width=0)
    net, curve, state = uat.fit_cenn(target, arch, samples, uat.FitBudget(), seed=0)
    assert state.sup_error() <= 1e-12
    assert curve[0]["sup_error"] <= 1e-12


def test_fitted_network_always_equivariant():
    cat, X, Y, R, sigma = c2_setting()
    target = uat.sample_equivariant_target(R, X, seed=3)
    rng = np.random.default_rng(1)
    samples = {"*": [rng.uniform(-1, 1, (1, 1)) for _ in range(24)]}
    arch = uat.FitArchitecture(R, X, sigma, carriers=2, width=4)
    # almost no training: equivariance must hold anyway
    net, _, _ = uat.fit_cenn(target, arch, samples, uat.FitBudget(iterations=1), seed=1)
    fuzz = [cq.random_section(X, np.random.default_rng(i)) for i in range(100)]
    assert cq.check_equivariance(net, cat, fuzz).max_residual <= 1e-9


def test_capacity_grid_monotone_and_converges():
    cat, X, Y, R, sigma = c2_setting()
    target = uat.sample_equivariant_target(R, X, seed=0)
    rng = np.random.default_rng(2)
    samples = {"*": [rng.uniform(-1, 1, (1, 1)) for _ in range(32)]}
    exp, best = uat.run_capacity_grid(
        target, R, X, sigma, samples, [1, 2], [0, 4],
        uat.FitBudget(iterations=120), seed=0, name="c2",
    )
    curve = exp.best_curve()
    assert all(curve[i + 1] <= curve[i] + 1e-15 for i in range(len(curve) - 1))
    assert curve[-1] <= 1e-2
    assert all(r["eqv_residual"] <= 1e-9 for r in exp.rows)


def test_gradient_check_small():
    cat, X, Y, R, sigma = c2_setting()
    target = uat.sample_equivariant_target(R, X, seed=0)
    samples = {"*": [np.random.default_rng(i).uniform(-1, 1, (1, 1)) for i in range(12)]}
    arch = uat.FitArchitecture(R, X, sigma, carriers=2, width=3)
    _, _, state = uat.fit_cenn(target, arch, samples, uat.FitBudget(iterations=5), seed=0)
    assert uat.gradient_check(state, n_points=5, seed=1) <= 1e-4


def test_fit_on_chain_graded():
    chain, X, Y, R, sigma = chain_setting()
    target = uat.sample_equivariant_target(R, X, seed=1)
    rng = np.random.default_rng(3)
    samples = {a: [rng.uniform(-1, 1, (1, 1)) for _ in range(24)] for a in chain.objects}
    arch = uat.FitArchitecture(R, X, sigma, carriers=2, width=8)
    net, curve, state = uat.fit_cenn(target, arch, samples, uat.FitBudget(iterations=200), seed=0)
    assert state.sup_error() <= 1e-2
    fuzz = [cq.random_section(X, np.random.default_rng(i)) for i in range(50)]
    assert cq.check_equivariance(net, chain, fuzz).max_residual <= 1e-9


def test_report_rendering():
    exp = uat.UatExperiment(name="demo", rows=[
        {"carriers": 1, "width": 0, "sup_error": 0.5, "eqv_residual": 0.0, "seed": 0, "runtime_s": 0.1},
        {"carriers": 2, "width": 4, "sup_error": 0.25, "eqv_residual": 0.0, "seed": 0, "runtime_s": 0.2},
    ], basis_constants={"*": 1.0})
    csv_text, md_text = uat.uat_report(exp)
    assert csv_text.splitlines()[0] == ",".join(uat.CSV_COLUMNS)
    assert "0.25" in csv_text and "demo" in md_text
    empty_csv, _ = uat.uat_report(uat.UatExperiment(name="empty"))
    assert empty_csv.strip() == ",".join(uat.CSV_COLUMNS)


def test_basis_constant_exact():
    assert uat.basis_constant(1) == 1.0
    assert abs(uat.basis_constant(4) - 2.0) <= 1e-15
