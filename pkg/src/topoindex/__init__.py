"""Z2 twist indices for one-dimensional lattice fermions by exact diagonalization."""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, NumericalError, RefinementError, ResourceError,
                     SymmetryError, TopoIndexError)
from .fock import FockBasis, enumerate_basis
from .models import (ModelSpec, add_disorder, build_atomic, build_extended_hubbard, build_hubbard_ssh,
                     build_rice_mele, build_ssh, restrict_half_chain, validate_symmetry)
from .solver import GroundStateResult, assemble, ground_state, solve
from .twist import (IndexReport, TwistProfile, build_twist, decoupled_index, default_profile, duality_check,
                    edge_excitation_search, expectation, lsm_bound, make_profile, z2_index)
from .quadratic import correlation_matrix, slater_twist_expectation, sp_spectrum, zak_phase
from .scan import PathSpec, disorder_ensemble, sweep, winding_number

__all__ = [
    "ConfigError", "DomainError", "NumericalError", "RefinementError", "ResourceError", "SymmetryError",
    "TopoIndexError", "FockBasis", "enumerate_basis", "ModelSpec", "add_disorder", "build_atomic",
    "build_extended_hubbard", "build_hubbard_ssh", "build_rice_mele", "build_ssh", "restrict_half_chain",
    "validate_symmetry", "GroundStateResult", "assemble", "ground_state", "solve", "IndexReport",
    "TwistProfile", "build_twist", "decoupled_index", "default_profile", "duality_check",
    "edge_excitation_search", "expectation", "lsm_bound", "make_profile", "z2_index", "correlation_matrix",
    "slater_twist_expectation", "sp_spectrum", "zak_phase", "PathSpec", "disorder_ensemble", "sweep",
    "winding_number",
]
