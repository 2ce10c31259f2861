"""6D object pose estimation, tracking and retargeting."""

from ._p6d import (
    CameraIntrinsics,
    DescriptorIndex,
    Error,
    KinematicChain,
    __version__,
    angular_distance,
    estimate_translation,
    forward_kinematics,
    global_rescale,
    interpolate,
    sample_so3,
    se3_exp,
    se3_log,
    solve_pnp,
    track_rot_error,
)

__all__ = [
    "CameraIntrinsics",
    "DescriptorIndex",
    "Error",
    "KinematicChain",
    "__version__",
    "angular_distance",
    "estimate_translation",
    "forward_kinematics",
    "global_rescale",
    "interpolate",
    "sample_so3",
    "se3_exp",
    "se3_log",
    "solve_pnp",
    "track_rot_error",
]
