"""Pseudo-spectral toolkit for Besov-space analysis of Navier-Stokes flows
around small stationary solutions on a periodic box."""

from .errors import NSBesovError, NumericalError, PreconditionError, SnapshotError
from .spectral import (
    Grid,
    SpectralField,
    SpectrumProfile,
    VectorField,
    div_tensor,
    inverse_transform,
    load_snapshot,
    make_grid,
    pointwise_product,
    random_field,
    save_snapshot,
    transform,
)
from .norms import BesovIndex, besov, besov_norm, dyadic_decompose, lp_norm, weak_lp_norm
from .multipliers import SectorPoint, frac_laplacian, heat_semigroup, leray_project, resolvent_laplacian

__version__ = "0.1.0"
