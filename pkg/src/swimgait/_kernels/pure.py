"""Numpy fallback for the hot kernels.

Both swimmer models reduce to the same algebra: each link carries a
diagonal 3x3 weight (drag coefficients or effective inertia) in its own
center frame, the chain geometry is fixed by the half link length, and
the connection comes from solving the 3x3 system formed by the weighted
sum over links. The compiled backend (``_core``) implements the same
contract; results must agree to rounding.

Chain convention: link 1 is the base frame, joint i sits at the distal
end of link i, joint angles are CCW-positive.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"

# |det| below this is treated as numerically unsolvable; affected rows
# come back as NaN rather than raising (callers apply their own policy).
_DET_FLOOR = 1e-30


def _link_frames(a1: np.ndarray, a2: np.ndarray, h: float):
    """Per-link adjoint blocks and joint columns for links 2 and 3.

    Returns (Ad2, S2, Ad3, S3) with shapes (N,3,3)/(N,3,2); link 1 is
    the identity/zero pair and is folded in by the caller.
    """
    n = a1.shape[0]
    c1, s1 = np.cos(a1), np.sin(a1)
    c2, s2 = np.cos(a2), np.sin(a2)
    a12 = a1 + a2
    c12, s12 = np.cos(a12), np.sin(a12)

    p2x = h * (1.0 + c1)
    p2y = h * s1
    p3x = h * (1.0 + 2.0 * c1 + c12)
    p3y = h * (2.0 * s1 + s12)

    zeros = np.zeros(n)
    ones = np.ones(n)

    def adinv(c, s, px, py):
        return np.stack(
            [
                np.stack([c, s, s * px - c * py], axis=-1),
                np.stack([-s, c, c * px + s * py], axis=-1),
                np.stack([zeros, zeros, ones], axis=-1),
            ],
            axis=-2,
        )

    ad2 = adinv(c1, s1, p2x, p2y)
    ad3 = adinv(c12, s12, p3x, p3y)

    # joint columns: rotation of link i about joint j located at c in the
    # link frame contributes (c_y, -c_x, 1)
    s2_col1 = np.stack([zeros, np.full(n, h), ones], axis=-1)
    s2_mat = np.stack([s2_col1, np.zeros((n, 3))], axis=-1)

    s3_col1 = np.stack([2.0 * h * s2, h * (1.0 + 2.0 * c2), ones], axis=-1)
    s3_mat = np.stack([s3_col1, s2_col1], axis=-1)
    return ad2, s2_mat, ad3, s3_mat


def connection_batch(a1, a2, h, w1, w2, w3):
    """Local connection A(alpha) at N shapes.

    Returns ``(A, det)`` with A of shape (N,3,2); rows where the 3x3
    block is numerically singular are NaN and ``det`` reports the raw
    determinant.
    """
    a1 = np.ascontiguousarray(a1, dtype=float)
    a2 = np.ascontiguousarray(a2, dtype=float)
    if a1.shape != a2.shape or a1.ndim != 1:
        raise ValueError("a1 and a2 must be equal-length 1-d arrays")
    w = np.array([w1, w2, w3])

    ad2, s2, ad3, s3 = _link_frames(a1, a2, h)
    wad2 = w[:, None] * ad2
    wad3 = w[:, None] * ad3

    block = np.diag(w) + np.einsum("nij,nik->njk", ad2, wad2) + np.einsum(
        "nij,nik->njk", ad3, wad3
    )
    rhs = np.einsum("nij,nik->njk", wad2, s2) + np.einsum("nij,nik->njk", wad3, s3)

    with np.errstate(invalid="ignore"):  # NaN shapes propagate as NaN rows
        det = np.linalg.det(block)
        bad = ~(np.abs(det) > _DET_FLOOR)
        if bad.any():
            block = block.copy()
            block[bad] = np.eye(3)
        a_mat = np.linalg.solve(block, rhs)
    if bad.any():
        a_mat[bad] = np.nan
    return a_mat, det


def _rotate_stage(theta, xi):
    c = math.cos(theta)
    s = math.sin(theta)
    return (c * xi[0] - s * xi[1], s * xi[0] + c * xi[1], xi[2])


def _pose_rk4(state, xi0, xim, xi1, dt):
    x, y, th = state
    k1 = _rotate_stage(th, xi0)
    k2 = _rotate_stage(th + 0.5 * dt * k1[2], xim)
    k3 = _rotate_stage(th + 0.5 * dt * k2[2], xim)
    k4 = _rotate_stage(th + dt * k3[2], xi1)
    return (
        x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        th + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )


def env_step(x, y, th, a1, a2, u1, u2, dt, limit, h, w1, w2, w3):
    """One environment step: joint rates held constant, pose integrated
    by RK4 with the connection re-evaluated at the substage shapes.

    Joints saturate at ``limit``: a joint reaching the limit mid-step is
    pinned there and its rate zeroed for the remainder of the step, so
    the returned shape always satisfies ``|a_i| <= limit``.
    """
    a = [min(max(a1, -limit), limit), min(max(a2, -limit), limit)]
    u = [u1, u2]
    # a joint already parked at its limit cannot push further out
    for i in (0, 1):
        if (a[i] >= limit and u[i] > 0.0) or (a[i] <= -limit and u[i] < 0.0):
            u[i] = 0.0
    if u[0] == 0.0 and u[1] == 0.0:
        return x, y, th, a[0], a[1]

    state = (x, y, th)
    t = 0.0
    for _ in range(4):
        rem = dt - t
        if rem <= 1e-15:
            break
        # earliest saturation within the remaining time, if any
        sub = rem
        for i in (0, 1):
            if u[i] != 0.0:
                target = limit if u[i] > 0.0 else -limit
                sub = min(sub, (target - a[i]) / u[i])
        hit = [
            u[i] != 0.0
            and ((limit if u[i] > 0.0 else -limit) - a[i]) / u[i] <= sub + 1e-15
            for i in (0, 1)
        ]

        half = 0.5 * sub
        sa1 = np.array([a[0], a[0] + u[0] * half, a[0] + u[0] * sub])
        sa2 = np.array([a[1], a[1] + u[1] * half, a[1] + u[1] * sub])
        amat, _ = connection_batch(sa1, sa2, h, w1, w2, w3)
        xis = -amat @ np.array(u)
        state = _pose_rk4(state, tuple(xis[0]), tuple(xis[1]), tuple(xis[2]), sub)
        a[0] += u[0] * sub
        a[1] += u[1] * sub
        t += sub

        if sub >= rem:
            for i in (0, 1):
                if hit[i]:
                    a[i] = limit if u[i] > 0.0 else -limit
            break
        for i in (0, 1):
            if hit[i]:
                a[i] = limit if u[i] > 0.0 else -limit
                u[i] = 0.0
        if u[0] == 0.0 and u[1] == 0.0:
            break
    return state[0], state[1], state[2], a[0], a[1]
