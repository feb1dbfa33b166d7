"""Geometric quantum states: measures on complex projective space."""

from importlib.metadata import PackageNotFoundError, version

from .canonical import (
    CanonicalSpec,
    SamplerWarning,
    canonical_grid_state,
    canonical_sampler,
    compare_geometric_gibbs,
    gibbs_density_matrix,
    partition_function,
)
from .errors import DimensionError, GqsError, InvariantError, PovmError, ResolutionError, SchemaError
from .gstate import (
    DeltaMixture,
    GridDensity,
    SampleEnsemble,
    density_matrix,
    eigen_mixture,
    expectation,
    histogram,
    povm_statistics,
)
from .hybrid import HybridState, capacity_bounds, decompose, pushforward, reconstruct, reduced_density_matrix
from .manifold import FsGrid, ProbPhasePoint, PureStatePoint, from_prob_phase, fs_uniform_grid, to_prob_phase
from .observables import DensityMatrix, Observable, Povm, validate_povm
from .thermo import BipartitePureState, LabeledEnsemble, environment_scaling_report, reconstruct_global, reduce

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0+unknown"
