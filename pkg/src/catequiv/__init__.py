"""Equivariant layer calculus on finite categories.

Build finite categories with measure weights, attach feature functors,
compile every naturality law into a linear system whose nullspace
parameterizes admissible kernels/biases/channels, evaluate the resulting
layers, realize retraction-based equivariant compilation, and demonstrate
universal approximation at desk scale.
"""

from .category import (
    FiniteCategory,
    ValidationReport,
    check_measure_properties,
    incoming_arrows,
    validate_category,
)
from .functors import (
    FeatureFunctor,
    ProbeFamily,
    Section,
    check_separation,
    identity_probe,
    random_section,
    scalar_stack,
    tau_probe,
    transport_operator,
    transport_section,
    transport_section_array,
    validate_functor,
)
from .kernels import (
    CategoryKernel,
    ConstraintSystem,
    KernelLayout,
    L1Bound,
    ScalarChannel,
    assemble_in_constraints,
    check_pointwise_steerability,
    compute_l1_bound,
    solve_natural_bias,
    solve_natural_linear_family,
    solve_parameter_space,
    solve_scalar_channels,
    solve_steerable_space,
)
from .layers import (
    Activation,
    AffineMap,
    BundleConvLayer,
    BundleSection,
    ClipMap,
    ComponentwiseLayer,
    ConvLayer,
    EquivarianceReport,
    FragmentMap,
    GateLayer,
    LiftLayer,
    NetworkSpec,
    ObjectwiseMap,
    ParallelLayer,
    bundle_conv_forward,
    bundle_lift,
    bundle_reindex,
    check_equivariance,
    componentwise_lift,
    conv_forward,
    evaluate_at,
    gate_forward,
    measure_lipschitz_quotients,
    network_forward,
)
from .compilation import (
    GradedData,
    Retraction,
    build_graded_target,
    build_haar_retraction,
    check_retraction,
    compile_equivariant,
)
from .builders import (
    BOTTOM,
    CWComplex,
    RootedPatch,
    build_action_groupoid,
    build_face_category,
    build_group_category,
    build_neighbourhood_functors,
    build_neighbourhood_groupoid,
    build_poset_category,
    cyclic_group,
    enumerate_rooted_isomorphisms,
    graph_complex,
    identity_functor,
    regular_representation,
    rooted_patch,
    symmetric_group_3,
)

__version__ = "0.1.0"
