"""Planar rigid-body kinematics on SE(2).

Conventions used throughout the package:

* A pose ``(x, y, theta)`` locates a body frame in some reference frame;
  ``theta`` is stored unwrapped (no modular reduction) so that net
  rotation accumulated over many gait cycles stays measurable.
* A body velocity ``(xi_x, xi_y, xi_theta)`` is the velocity of a frame
  expressed in that same frame.
* A wrench ``(f_x, f_y, tau)`` is a planar force plus torque about the
  frame origin.

Everything here is a pure function of its arguments; no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Pose",
    "BodyVelocity",
    "Wrench",
    "body_to_world",
    "se2_compose",
    "se2_inverse",
    "se2_exp",
    "adjoint_inverse_matrix",
    "wrench_transform_matrix",
    "transform_wrench",
    "integrate_pose",
]


@dataclass(frozen=True)
class Pose:
    """SE(2) element: position (m) and unwrapped orientation (rad)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0


@dataclass(frozen=True)
class BodyVelocity:
    """Velocity of a frame expressed in itself (m/s, m/s, rad/s)."""

    xi_x: float = 0.0
    xi_y: float = 0.0
    xi_theta: float = 0.0


@dataclass(frozen=True)
class Wrench:
    """Planar force (N) and torque about the frame origin (N m)."""

    f_x: float = 0.0
    f_y: float = 0.0
    tau: float = 0.0


def body_to_world(pose: Pose, xi: BodyVelocity) -> tuple[float, float, float]:
    """Map a body velocity to world-frame rates ``(xdot, ydot, thetadot)``.

    The rotation block acts on the translational part only; the angular
    rate passes through unchanged.
    """
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    return (
        c * xi.xi_x - s * xi.xi_y,
        s * xi.xi_x + c * xi.xi_y,
        xi.xi_theta,
    )


def se2_compose(g1: Pose, g2: Pose) -> Pose:
    """Compose two poses: the frame of ``g2`` expressed through ``g1``."""
    c = math.cos(g1.theta)
    s = math.sin(g1.theta)
    return Pose(
        g1.x + c * g2.x - s * g2.y,
        g1.y + s * g2.x + c * g2.y,
        g1.theta + g2.theta,
    )


def se2_inverse(g: Pose) -> Pose:
    c = math.cos(g.theta)
    s = math.sin(g.theta)
    return Pose(-(c * g.x + s * g.y), -(-s * g.x + c * g.y), -g.theta)


def se2_exp(xi: BodyVelocity, t: float = 1.0) -> Pose:
    """Closed-form SE(2) exponential of a constant body velocity over time t.

    For nonzero angular rate this is a circular arc of radius
    ``|v| / xi_theta``; used as the exact reference for the RK4 step.
    """
    phi = xi.xi_theta * t
    vx = xi.xi_x * t
    vy = xi.xi_y * t
    if abs(phi) < 1e-6:
        # series for sin(phi)/phi and (1-cos(phi))/phi
        a = 1.0 - phi * phi / 6.0 * (1.0 - phi * phi / 20.0)
        b = phi / 2.0 * (1.0 - phi * phi / 12.0)
    else:
        a = math.sin(phi) / phi
        b = (1.0 - math.cos(phi)) / phi
    return Pose(a * vx - b * vy, b * vx + a * vy, phi)


def adjoint_inverse_matrix(offset: Pose) -> np.ndarray:
    """Matrix of ``Ad_{offset^-1}`` acting on body-velocity triples.

    If frame B sits at ``offset`` within frame A, this maps A's body
    velocity to the velocity it induces on B, expressed in B.
    """
    c = math.cos(offset.theta)
    s = math.sin(offset.theta)
    return np.array(
        [
            [c, s, s * offset.x - c * offset.y],
            [-s, c, c * offset.x + s * offset.y],
            [0.0, 0.0, 1.0],
        ]
    )


def wrench_transform_matrix(offset: Pose) -> np.ndarray:
    """Matrix carrying a wrench from the ``offset`` frame into its parent.

    This is the transpose of :func:`adjoint_inverse_matrix` (dual map).
    """
    return adjoint_inverse_matrix(offset).T.copy()


def transform_wrench(offset: Pose, w: Wrench) -> Wrench:
    """Re-express a wrench applied at ``offset`` in the parent frame.

    Forces rotate; the torque picks up the moment of the rotated force
    about the parent origin.
    """
    c = math.cos(offset.theta)
    s = math.sin(offset.theta)
    fx = c * w.f_x - s * w.f_y
    fy = s * w.f_x + c * w.f_y
    return Wrench(fx, fy, w.tau + offset.x * fy - offset.y * fx)


def integrate_pose(
    pose: Pose,
    xi_fn: Callable[[float], BodyVelocity],
    dt: float,
    t0: float = 0.0,
) -> Pose:
    """Advance a pose by one fourth-order Runge-Kutta step of gdot = TeLg xi.

    ``xi_fn`` is sampled at ``t0``, ``t0 + dt/2`` and ``t0 + dt``.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    def deriv(t: float, s: tuple[float, float, float]) -> tuple[float, float, float]:
        return body_to_world(Pose(s[0], s[1], s[2]), xi_fn(t))

    s0 = (pose.x, pose.y, pose.theta)
    k1 = deriv(t0, s0)
    k2 = deriv(t0 + dt / 2, tuple(s + dt / 2 * k for s, k in zip(s0, k1)))
    k3 = deriv(t0 + dt / 2, tuple(s + dt / 2 * k for s, k in zip(s0, k2)))
    k4 = deriv(t0 + dt, tuple(s + dt * k for s, k in zip(s0, k3)))
    return Pose(
        *(
            s + dt / 6 * (a + 2 * b + 2 * c + d)
            for s, a, b, c, d in zip(s0, k1, k2, k3, k4)
        )
    )
