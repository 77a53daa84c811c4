"""Closed-form projection onto the rotation group and relative-pose helpers.

``procrustes_project`` solves argmax_R <R, X>_F over SO(d) by stripping the
singular values from an SVD of X and correcting the determinant on the
smallest singular direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Rotation", "procrustes_project", "relative_pose"]

ROTATION_TOL = 1e-10
_DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Rotation:
    """A validated d x d rotation matrix.

    ``degenerate`` marks outputs of :func:`procrustes_project` whose input
    admitted more than one maximizer; the stored matrix is still a valid
    maximizer and safe to use downstream.
    """

    matrix: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("rotation must be a square matrix")
        if np.linalg.norm(m.T @ m - np.eye(m.shape[0])) >= ROTATION_TOL:
            raise ValueError("matrix is not orthogonal to 1e-10")
        if abs(np.linalg.det(m) - 1.0) >= ROTATION_TOL:
            raise ValueError("matrix determinant is not +1")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def T(self) -> "Rotation":
        """The inverse rotation."""
        return Rotation(self.matrix.T.copy(), self.degenerate)


def _as_matrix(rotation_like) -> np.ndarray:
    if isinstance(rotation_like, Rotation):
        return rotation_like.matrix
    return np.asarray(rotation_like, dtype=float)


def procrustes_project(x: np.ndarray) -> Rotation:
    """Project a square matrix onto SO(d), maximizing <R, X>_F.

    From the SVD X = A diag(s) V^T (singular values descending), the
    maximizer over SO(d) is A L V^T with L = I when det(A V^T) > 0 and
    L = diag(1, ..., 1, -1) otherwise, so the sign flip lands on the
    smallest singular direction.

    When the flip is active and the smallest singular value vanishes (or
    ties with the next one), the maximizer is not unique; one maximizer is
    returned with its ``degenerate`` flag set.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("input must be a square matrix")
    if x.shape[0] < 2:
        raise ValueError("rotation projection needs d >= 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite entries")

    a, s, vt = np.linalg.svd(x)
    degenerate = False
    if np.linalg.det(a @ vt) < 0:
        scale = max(s[0], np.finfo(float).tiny)
        if s[-1] <= _DEGENERACY_RTOL * scale or (s[-2] - s[-1]) <= _DEGENERACY_RTOL * scale:
            degenerate = True
        a = a.copy()
        a[:, -1] = -a[:, -1]
    return Rotation(a @ vt, degenerate)


def relative_pose(pose_i, pose_j) -> Rotation:
    """Relative rotation P_i^T P_j carrying frame i into frame j.

    Satisfies R_ij = R_ji^T and R_ii = I.
    """
    pi = _as_matrix(pose_i)
    pj = _as_matrix(pose_j)
    if pi.shape != pj.shape:
        raise ValueError("poses must share one dimension")
    return Rotation(pi.T @ pj)
