"""Three-link swimmer models and their local connections.

Two idealized planar swimmers share one chain geometry (three links
joined end to end, CCW-positive joint angles, base frame at the center
of the proximal link):

* drag-dominated ("low_re"): slender rods with anisotropic viscous drag;
  zero net drag force/torque at all times yields a Pfaffian constraint
  ``omega1(alpha) xi + omega2(alpha) adot = 0``.
* inertia-dominated ("high_re"): elliptical links carrying rigid-body
  plus added-mass inertia; conservation of the (initially zero) momentum
  plays the same role.

Either way the constraint solves to the kinematic reconstruction
equation ``xi = -A(alpha) adot`` with A the 3x2 local connection. The
functions here build everything explicitly link by link so tests can
check the fast kernels against a brute-force assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import BodyVelocity, Pose, Wrench, adjoint_inverse_matrix, se2_compose, wrench_transform_matrix

__all__ = [
    "Shape",
    "LowReParams",
    "HighReParams",
    "LinkKinematics",
    "SwimmerModel",
    "SingularConstraint",
    "SingularInertia",
    "link_kinematics",
    "low_re_link_wrench",
    "low_re_constraint_matrices",
    "low_re_connection",
    "ellipse_effective_inertia",
    "high_re_mass_matrix",
    "high_re_connection",
    "low_re_model",
    "high_re_model",
    "make_model",
]

SINGULARITY_TOL = 1e-12

# The chain extends toward -x from the base link, i.e. the base link's
# x axis points at the swimmer's free end. With CCW-positive joints this
# makes the hand-tuned sinusoidal gait (joint 2 lagging joint 1) drive
# the swimmer toward +x, so distance rewards are positive. Encoded as a
# signed half length: every translation in the chain scales with it.
CHAIN_DIRECTION = -1.0


class SingularConstraint(RuntimeError):
    """Drag constraint matrix numerically singular at this shape."""


class SingularInertia(RuntimeError):
    """Locked inertia block numerically singular (indicates a model bug)."""


@dataclass(frozen=True)
class Shape:
    """Joint angles (rad) of the two joints, CCW positive."""

    alpha1: float
    alpha2: float


@dataclass(frozen=True)
class LowReParams:
    """Slender-rod swimmer in a viscous fluid.

    ``drag_constant`` scales all drag linearly and therefore cancels in
    the connection; ``lateral_ratio`` is the lateral:longitudinal drag
    coefficient ratio (> 1 for a slender body).
    """

    link_length: float = 0.3
    drag_constant: float = 1.0
    lateral_ratio: float = 2.0

    def __post_init__(self):
        if self.link_length <= 0 or self.drag_constant <= 0:
            raise ValueError("link_length and drag_constant must be positive")
        if self.lateral_ratio <= 1:
            raise ValueError("lateral_ratio must exceed 1")


@dataclass(frozen=True)
class HighReParams:
    """Elliptical-link swimmer in an inviscid fluid.

    Links are ellipses with semi-axes ``(semi_major, semi_minor)``,
    joined tip to tip (link length ``2 * semi_major``). ``density_scale``
    multiplies the rigid-body link mass relative to neutral buoyancy;
    ``added_mass_scale`` exists to ablate the fluid contribution.
    """

    rho: float = 1.0
    semi_major: float = 4.0
    semi_minor: float = 1.0
    density_scale: float = 1.0
    added_mass_scale: float = 1.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("fluid density must be positive")
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError("require semi_major >= semi_minor > 0")
        if self.density_scale < 0 or self.added_mass_scale < 0:
            raise ValueError("inertia scales must be nonnegative")
        if self.density_scale == 0 and self.added_mass_scale == 0:
            raise ValueError("links need some inertia")

    @property
    def link_length(self) -> float:
        return 2.0 * self.semi_major


@dataclass(frozen=True)
class LinkKinematics:
    """Link center poses in the base frame and exact 3x5 jacobians
    mapping ``(xi, adot)`` to each link's body velocity."""

    poses: tuple[Pose, Pose, Pose]
    jacobians: tuple[np.ndarray, np.ndarray, np.ndarray]


def link_kinematics(alpha: Shape, link_length: float) -> LinkKinematics:
    """Chain layout and analytic jacobians for the three-link swimmer.

    Joint 1 sits at the chain-side end of link 1 (a half length along
    the chain direction); link 2 is rotated by alpha1 (CCW positive)
    about it with its center a half length beyond; joint 2 / link 3
    repeat the pattern with alpha2.
    """
    if link_length <= 0:
        raise ValueError("link_length must be positive")
    h = CHAIN_DIRECTION * link_length / 2.0
    a1, a2 = alpha.alpha1, alpha.alpha2

    pose1 = Pose()
    pose2 = se2_compose(Pose(h, 0.0, a1), Pose(h, 0.0, 0.0))
    pose3 = se2_compose(pose2, se2_compose(Pose(h, 0.0, a2), Pose(h, 0.0, 0.0)))

    j1 = np.hstack([np.eye(3), np.zeros((3, 2))])

    # rotation about a joint at position c in the link frame moves the
    # link origin at rate (c_y, -c_x) per unit joint speed
    j2 = np.hstack(
        [adjoint_inverse_matrix(pose2), np.array([[0.0, 0.0], [h, 0.0], [1.0, 0.0]])]
    )
    s3_first = np.array(
        [
            [2.0 * h * math.sin(a2), 0.0],
            [h * (1.0 + 2.0 * math.cos(a2)), h],
            [1.0, 1.0],
        ]
    )
    j3 = np.hstack([adjoint_inverse_matrix(pose3), s3_first])
    return LinkKinematics(poses=(pose1, pose2, pose3), jacobians=(j1, j2, j3))


def _drag_coefficients(p: LowReParams) -> np.ndarray:
    """Diagonal drag map (force/torque per unit body velocity) of one rod.

    Integrating a per-unit-length drag of -k (longitudinal) and
    -lateral_ratio*k (lateral) over the rod gives the three entries.
    """
    k, r, length = p.drag_constant, p.lateral_ratio, p.link_length
    return -np.array([k * length, r * k * length, r * k * length**3 / 12.0])


def low_re_link_wrench(xi: BodyVelocity, p: LowReParams) -> Wrench:
    """Viscous drag wrench on one rod moving with body velocity xi, in
    the rod's center frame."""
    d = _drag_coefficients(p)
    return Wrench(d[0] * xi.xi_x, d[1] * xi.xi_y, d[2] * xi.xi_theta)


def low_re_constraint_matrices(alpha: Shape, p: LowReParams) -> tuple[np.ndarray, np.ndarray]:
    """Total drag wrench on the swimmer, expressed in the base frame, as
    ``omega1(alpha) xi + omega2(alpha) adot``.

    Assembled link by link: each link's drag wrench is transported into
    the base frame with the dual (wrench) transform. This is the
    reference route the fast kernels are validated against.
    """
    kin = link_kinematics(alpha, p.link_length)
    d = _drag_coefficients(p)
    total = np.zeros((3, 5))
    for pose_i, jac_i in zip(kin.poses, kin.jacobians):
        total += wrench_transform_matrix(pose_i) @ (d[:, None] * jac_i)
    return total[:, :3].copy(), total[:, 3:].copy()


def ellipse_effective_inertia(p: HighReParams) -> np.ndarray:
    """Rigid-body plus added-mass inertia of one elliptical link, in its
    center frame (diagonal by symmetry).

    Added mass of an ellipse in potential flow: rho*pi*b^2 along the
    major axis, rho*pi*a^2 along the minor axis, rho*pi*(a^2-b^2)^2/8 in
    rotation. Rigid terms use m = rho*pi*a*b (neutral buoyancy) times
    ``density_scale`` and J = m(a^2+b^2)/4.
    """
    a, b, rho = p.semi_major, p.semi_minor, p.rho
    m = p.density_scale * rho * math.pi * a * b
    j = m * (a * a + b * b) / 4.0
    am = p.added_mass_scale
    return np.diag(
        [
            m + am * rho * math.pi * b * b,
            m + am * rho * math.pi * a * a,
            j + am * rho * math.pi * (a * a - b * b) ** 2 / 8.0,
        ]
    )


def high_re_mass_matrix(alpha: Shape, p: HighReParams) -> np.ndarray:
    """Kinetic-energy metric over ``(xi, adot)``: sum of per-link
    quadratic forms through the link jacobians. Symmetric positive
    definite."""
    kin = link_kinematics(alpha, p.link_length)
    g = ellipse_effective_inertia(p)
    total = np.zeros((5, 5))
    for jac_i in kin.jacobians:
        total += jac_i.T @ g @ jac_i
    return total


def _solve_connection(block: np.ndarray, rhs: np.ndarray, err: type[RuntimeError], what: str) -> np.ndarray:
    det = float(np.linalg.det(block))
    if not math.isfinite(det) or abs(det) < SINGULARITY_TOL:
        raise err(f"{what}: |det| = {abs(det):.3e} below {SINGULARITY_TOL:g}")
    return np.linalg.solve(block, rhs)


def low_re_connection(alpha: Shape, p: LowReParams) -> np.ndarray:
    """Local connection of the drag swimmer: the 3x2 matrix A with
    ``xi = -A(alpha) adot`` the unique velocity with zero net drag.

    Independent of ``drag_constant`` (uniform drag scaling cancels).
    """
    omega1, omega2 = low_re_constraint_matrices(alpha, p)
    return _solve_connection(omega1, omega2, SingularConstraint, "drag constraint")


def high_re_connection(alpha: Shape, p: HighReParams) -> np.ndarray:
    """Local connection of the inertial swimmer, extracted from the mass
    matrix blocks: ``A = I^-1 (I A)`` so that ``xi = -A adot`` keeps the
    system momentum at zero."""
    mass = high_re_mass_matrix(alpha, p)
    return _solve_connection(
        mass[:3, :3], mass[:3, 3:], SingularInertia, "locked inertia"
    )


@dataclass(frozen=True)
class SwimmerModel:
    """Uniform fast-path handle on either swimmer.

    Both models reduce to a per-link diagonal weight plus half link
    length, which is all the kernels need; ``kind`` tags the physics for
    error reporting and the CLI.
    """

    kind: str
    half_length: float
    weights: tuple[float, float, float]

    @property
    def kernel_args(self) -> tuple[float, float, float, float]:
        return (self.half_length, *self.weights)

    def connection_batch(self, a1, a2) -> np.ndarray:
        """Connection at many shapes; shape (N, 3, 2). Rows where the
        model is numerically degenerate come back NaN."""
        amat, det = _kernels.connection_batch(
            np.atleast_1d(np.asarray(a1, float)),
            np.atleast_1d(np.asarray(a2, float)),
            *self.kernel_args,
        )
        bad = ~(np.abs(det) >= SINGULARITY_TOL)
        if bad.any():
            amat = amat.copy()
            amat[bad] = np.nan
        return amat

    def connection(self, alpha1: float, alpha2: float) -> np.ndarray:
        amat, det = _kernels.connection_batch(
            np.array([alpha1]), np.array([alpha2]), *self.kernel_args
        )
        if not abs(float(det[0])) >= SINGULARITY_TOL:
            err = SingularConstraint if self.kind == "low_re" else SingularInertia
            raise err(f"degenerate shape ({alpha1:.6g}, {alpha2:.6g})")
        return amat[0]


def low_re_model(p: LowReParams = LowReParams()) -> SwimmerModel:
    # drag_constant and the overall k*L factor cancel in the connection;
    # only the ratio structure survives
    length = p.link_length
    return SwimmerModel(
        kind="low_re",
        half_length=CHAIN_DIRECTION * length / 2.0,
        weights=(1.0, p.lateral_ratio, p.lateral_ratio * length**2 / 12.0),
    )


def high_re_model(p: HighReParams = HighReParams()) -> SwimmerModel:
    g = ellipse_effective_inertia(p)
    return SwimmerModel(
        kind="high_re",
        half_length=CHAIN_DIRECTION * p.semi_major,
        weights=(float(g[0, 0]), float(g[1, 1]), float(g[2, 2])),
    )


def make_model(kind: str, params=None) -> SwimmerModel:
    if kind == "low_re":
        return low_re_model(params if params is not None else LowReParams())
    if kind == "high_re":
        return high_re_model(params if params is not None else HighReParams())
    raise ValueError(f"unknown swimmer kind {kind!r} (use 'low_re' or 'high_re')")
