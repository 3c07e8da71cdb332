"""Generalized Biot-Savart operator on bounded domains with triangulated boundaries.

Given a divergence-free vorticity ``omega`` whose flux through every boundary
component vanishes, :func:`solve_tangential` returns a velocity ``u`` with
``curl u = omega``, ``div u = 0`` and ``u . nu = 0`` on the boundary.
"""

from .biot_savart import (VolumeField, a_field, a_fields, bs_gradient_pv, bs_volume,
                          curl_from_jacobian, curl_identity_residual, curl_identity_terms)
from .divcurl import (FieldEvaluator, domain_integral, newton_gradient, newton_potential,
                      probe_points, residuals, solve_general, solve_tangential)
from .errors import (AdmissibilityError, BsdError, CoincidentPoints, CompatibilityViolation,
                     DegeneratePanel, EmptyQuadrature, FluxViolation, IllConditioned, MeshError,
                     NonManifold, NumericsError, OnAxis, OpenSurface, OutsideDomain, SizeMismatch,
                     TooCloseToBoundary)
from .geometry import (DomainModel, SurfaceMesh, VolumeQuadrature, build_domain, build_surface,
                       component_flux, component_genus, ell, load_surface, signed_distance, voxelize)
from .kernel_probe import (ProbeReport, k1_eval, probe_decay, ring_vorticity, torus_harmonic_field,
                           vortex_ring)
from .layer_potentials import (BoundaryDensity, LayerOperator, assemble_T0, check_flux,
                               grad_single_layer, load_matrix, single_layer, solve_f, solve_g)

__version__ = "0.1.0"
