"""Static equilibria of discretized convex curves, surfaces and meshes.

Smooth convex curves and surfaces are sampled on equidistant parameter
grids, the resulting polygons/polyhedra are classified into stable, saddle
and unstable equilibria relative to a reference point, and the counts near
each smooth equilibrium ("flocks") are compared with closed-form imaginary
equilibrium indices and their error bounds.
"""

__version__ = "0.1.0"

from .errors import (ClassificationError, DegenerateError, DiscretizationError, GeometryError,  # noqa: E402
                     MeshFormatError, NonConvexError, PolyeqError, WindowError)
from .geometry import (FundamentalForms, ParametricCurve, ParametricSurface, SmoothEquilibrium,  # noqa: E402
                       classify_smooth, equilibrium_at, find_curve_equilibria, find_smooth_equilibria,
                       fundamental_forms, jet, principal_curvatures)
from .indices import (ErrorBounds, ImaginaryIndices, RegionSet, error_bounds, flock_identity,  # noqa: E402
                      imaginary_indices_2d, imaginary_indices_3d, predicted_regions)
from .discretize import (ClosedHullMesh, PolygonalCurve, PolyhedralPatch, choose_diagonal,  # noqa: E402
                         discretize_curve, discretize_surface, hull_of_samples)
from .classify import (EquilibriumPoint, EquilibriumSet, classify_patch, classify_polygon,  # noqa: E402
                       poincare_hopf, support_test)
from .analysis import (AverageSeries, FlockReport, closed_surface_report, cluster_flocks,  # noqa: E402
                       curve_flock, equidistribution_fraction, expected_count_mc, flock_report_patch,
                       lattice_count, running_averages, window_counts)
from .meshio import TriangleMesh, load_mesh, write_obj, write_ply  # noqa: E402
from .pebble import CurvatureEstimate, PebbleReport, estimate_curvatures, pebble_report, solid_centroid  # noqa: E402
