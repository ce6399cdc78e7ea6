"""nilray: intrinsic rendering and numerics for Nil geometry.

The functions named like their home modules (distance.distance, march.march,
render.render) are reached through the submodules to keep the namespaces
unambiguous; everything else is re-exported here.
"""

from .core import (
    NilIsometry,
    NilTangent,
    apply_isometry,
    compose_isometry,
    group_inv,
    group_mul,
    heis_to_rot,
    invert_isometry,
    rot_to_heis,
    rotate_vertical,
    tangent_from_coordinate_velocity,
)
from .geodesic import (
    CameraState,
    GeodesicParams,
    exp,
    exp_origin,
    flow_state,
    geodesic_ode,
    parallel_transport,
)
from .distance import (
    AmbiguousNearCutLocus,
    NoConvergence,
    far_field_estimate,
    inverse_exp,
)
from .march import Hit, MarchConfig, Miss, pixel_to_tangent, shade
from .quotient import in_domain, march_quotient, teleport, teleport_state
from .scene import Light, Scene, SceneObject, Texture, scene_sdf, surface_normal

__version__ = "0.1.0"

__all__ = [
    "NilIsometry", "NilTangent", "apply_isometry", "compose_isometry",
    "group_inv", "group_mul", "heis_to_rot", "invert_isometry", "rot_to_heis",
    "rotate_vertical", "tangent_from_coordinate_velocity",
    "CameraState", "GeodesicParams", "exp", "exp_origin", "flow_state",
    "geodesic_ode", "parallel_transport",
    "AmbiguousNearCutLocus", "NoConvergence", "far_field_estimate",
    "inverse_exp",
    "Hit", "MarchConfig", "Miss", "pixel_to_tangent", "shade",
    "in_domain", "march_quotient", "teleport", "teleport_state",
    "Light", "Scene", "SceneObject", "Texture", "scene_sdf", "surface_normal",
    "__version__",
]
