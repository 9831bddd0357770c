"""Approximate Lie point symmetry algebras of scalar ODEs with inexact coefficients."""

from .detsys import ODESpec, generate_determining_system
from .giforms import InvolutiveForm, ToleranceConfig, dimension_table, involutive_completion
from .isoclass import IsoConfig, IsoVerdict, iso_residual, test_isomorphism
from .jet import assemble_matrix, prolong, prolong_to
from .liestruct import ReliabilityReport, StructureTensor, structure_constants
from .parsing import parse
from .scan import GridSpec, AxisRange, PointResult, partition_regions, scan_grid

__version__ = "0.1.0"

__all__ = [
    "ODESpec", "generate_determining_system", "InvolutiveForm", "ToleranceConfig",
    "dimension_table", "involutive_completion", "IsoConfig", "IsoVerdict", "iso_residual",
    "test_isomorphism", "assemble_matrix", "prolong", "prolong_to", "ReliabilityReport",
    "StructureTensor", "structure_constants", "parse", "GridSpec", "AxisRange", "PointResult",
    "partition_regions", "scan_grid",
]
