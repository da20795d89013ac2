"""Channel polarization and polar codes over arbitrary finite input alphabets."""

__version__ = "0.1.0"

from .algebra import cyclic_group, finite_field, half_multiplier_set, permutation_set
from .channel import (
    Channel,
    MetricsReport,
    average_z,
    capacity_bounds_from_z,
    make_channel,
    merge_outputs_lossless,
    metrics,
    ml_error_probability,
    pairwise_z,
    pairwise_z_matrix,
    quantize_outputs,
    random_channel,
    read_channel_file,
    symmetric_capacity,
    write_channel_file,
    z_profile,
)
from .codec import MultilevelCode, dump_spec, encode, load_spec, multilevel_codec, sc_decode
from .construction import (
    PolarCodeSpec,
    construct_code,
    evolve_tree,
    polarization_fraction,
    rate_experiment,
    select_information_set,
)
from .errors import PolarError
from .harness import counterexample4, factory, qec, qsc, simulate_bler
from .kernels import (
    KernelConfig,
    apply_kernel,
    decompose_composite,
    find_good_permutation,
    make_kernel,
    shape_channel,
    split_deterministic,
    split_multiplier,
    split_random_perm,
)
