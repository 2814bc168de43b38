"""fermidyn: a sector-blocked fermionic lattice laboratory.

Finite chains stand in for continuum one-particle space; on top of them
the package builds the antisymmetric Fock sectors, creation/annihilation
operators and their algebraic identities, canonical sector
decompositions with coherence maps between particle numbers, exact
propagators with the interaction-picture Dyson calculus, and trapped
Gibbs states with KMS checks.  Hot occupation-basis kernels run through
an optional compiled extension with a pure-numpy fallback
(``fermidyn.backend_name()`` reports which one is active).
"""

__version__ = "0.1.0"

from ._backend import backend_name
from .basis import SectorBasis, sector_basis, sector_dim
from .errors import (
    BudgetError,
    ConfigError,
    FermidynError,
    FrequencyCoverageError,
    KernelMismatch,
    LevelError,
    OpenBoundaryClipError,
    OverflowGuardError,
    QuadratureNotConverged,
    ShapeError,
    TailBoundExceeded,
    TruncationWarning,
)
from .fock import (
    FockOperator,
    FockSpace,
    FockVector,
    annihilate,
    create,
    creation_product_vector,
    embed,
    number_op,
    placement_count,
    wedge_operator,
    wedge_vector,
)
from .lattice import (
    OneBodySpace,
    OneBodyVector,
    PotentialProfile,
    kinetic_matrix,
    pair_interaction,
    translate,
)
from .quadrature import QuadratureSpec
from .sectors import (
    SectorDecomposition,
    alternating_number_product,
    clustering_correlator,
    descend,
    extract,
    realize,
    realized_family,
    separation_residuals,
)

__all__ = [name for name in dir() if not name.startswith("_")]
