"""Lie point symmetries of parabolic-elliptic systems."""
from .catalog import (
    CatalogEntry, ConstraintError, EntryReport, GeneratorCheck, GeneratorTemplate, catalog_dir,
    closure_check, determining_check, family_samples, find_entry, load_catalog, load_entry,
    verify_catalog_entry,
)
from .core import (
    COORDS, JETS, PLANAR, ConstantDiffusivityError, Generator, GeneratorClassError, PESystem,
    commutator, determining_residuals, invariance_residuals, prolong2, prolonged_action,
)
from .flow import FlowReport, flow_check, transported_residual, travelling_wave

__all__ = [
    "COORDS", "CatalogEntry", "ConstantDiffusivityError", "ConstraintError", "EntryReport",
    "FlowReport", "Generator", "GeneratorCheck", "GeneratorClassError", "GeneratorTemplate",
    "JETS", "PESystem", "PLANAR", "catalog_dir", "closure_check", "commutator",
    "determining_check", "determining_residuals", "family_samples", "find_entry", "flow_check",
    "invariance_residuals", "load_catalog", "load_entry", "prolong2", "prolonged_action",
    "transported_residual", "travelling_wave", "verify_catalog_entry",
]
