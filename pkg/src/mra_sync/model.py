"""Generative model for grid-structured matrix signals with per-block rotations.

The signal lives on a lattice of blocks; each block carries a D x d real
matrix. All blocks are drawn jointly from a matrix-normal prior whose row
covariance couples every cell of every block through a squared-exponential
kernel on the cell grid. Each block is then rotated on the right by an
unknown d x d rotation and observed under i.i.d. Gaussian noise.

Conventions
-----------
* Block index ``i`` maps row-major to lattice position
  ``(i // width_blocks, i % width_blocks)``.
* Cell ``a`` of a block maps row-major to in-block position
  ``(a // block_cols, a % block_cols)``; cell ``(r, c)`` of the block at
  lattice position ``(R, C)`` sits at absolute grid coordinates
  ``(R * block_rows + r, C * block_cols + c)``.
* The stacked signal is the (N*D) x d matrix of all blocks in index order;
  its columns are i.i.d. N(0, U).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import cho_solve, lapack

__all__ = [
    "GridSpec",
    "KernelSpec",
    "RowCovariance",
    "ChannelField",
    "PoseSet",
    "ObservationSet",
    "CovarianceTiles",
    "TripletCovariance",
    "NotPositiveDefiniteError",
    "InvalidTripletError",
    "build_row_covariance",
    "subslice_covariance",
    "split_triplet_tiles",
    "sample_channel",
    "sample_pose_set",
    "apply_precoding",
    "observe",
    "log_prior_density",
]

SYMMETRY_RTOL = 1e-12
ORTHOGONALITY_TOL = 1e-10


class NotPositiveDefiniteError(ValueError):
    """A covariance factorization failed.

    ``minor_index`` is the 1-based order of the offending leading minor as
    reported by the Cholesky routine.
    """

    def __init__(self, minor_index: int, message: str | None = None):
        self.minor_index = minor_index
        super().__init__(
            message
            or f"matrix is not positive definite "
            f"(leading minor of order {minor_index})"
        )


class InvalidTripletError(ValueError):
    """Block triple with duplicate or out-of-range indices."""


def _cholesky_lower(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising NotPositiveDefiniteError on failure."""
    c, info = lapack.dpotrf(matrix, lower=1, overwrite_a=0, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of Cholesky")
    return c


@dataclass(frozen=True)
class GridSpec:
    """Dimensions of the block lattice and of the per-block signal.

    Attributes
    ----------
    height_blocks, width_blocks : int
        Lattice extent in blocks.
    block_rows, block_cols : int
        Cell extent of one block; D = block_rows * block_cols.
    antennas : int
        Column dimension d of every block matrix (rotations act here).
    """

    height_blocks: int
    width_blocks: int
    block_rows: int
    block_cols: int
    antennas: int

    def __post_init__(self):
        for name in ("height_blocks", "width_blocks", "block_rows", "block_cols"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.antennas < 2:
            raise ValueError("antennas must be >= 2 (rotations are trivial below)")

    @property
    def n_blocks(self) -> int:
        return self.height_blocks * self.width_blocks

    @property
    def block_cells(self) -> int:
        return self.block_rows * self.block_cols

    def block_position(self, index: int) -> tuple[int, int]:
        """Lattice (row, col) of a block index."""
        if not 0 <= index < self.n_blocks:
            raise IndexError(f"block index {index} out of range [0, {self.n_blocks})")
        return divmod(index, self.width_blocks)

    def block_index(self, row: int, col: int) -> int:
        """Inverse of :meth:`block_position`."""
        if not (0 <= row < self.height_blocks and 0 <= col < self.width_blocks):
            raise IndexError(f"lattice position ({row}, {col}) out of range")
        return row * self.width_blocks + col

    def cell_positions(self) -> np.ndarray:
        """Absolute 2-D coordinates of every cell, ordered by (block, cell).

        Returns an (N*D, 2) float array; row ``i*D + a`` holds the position
        of cell ``a`` of block ``i``.
        """
        rows = []
        for i in range(self.n_blocks):
            br, bc = self.block_position(i)
            for r in range(self.block_rows):
                for c in range(self.block_cols):
                    rows.append((br * self.block_rows + r, bc * self.block_cols + c))
        return np.asarray(rows, dtype=float)


@dataclass(frozen=True)
class KernelSpec:
    """Squared-exponential kernel on cell coordinates: unit variance at zero lag.

    ``length_scale`` is in cell units; ``jitter`` is added to the diagonal of
    the assembled covariance to keep it factorizable when the kernel is
    near-singular.
    """

    length_scale: float
    jitter: float = 1e-9

    def __post_init__(self):
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")


@dataclass(frozen=True, eq=False)
class RowCovariance:
    """SPD row covariance of the stacked signal, with block-aware slicing.

    ``matrix`` is (N*D) x (N*D); ``block_size`` is D. Construction validates
    symmetry and positive definiteness (via Cholesky; the factor is kept for
    sampling and density evaluation).
    """

    matrix: np.ndarray
    block_size: int
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("covariance must be a square matrix")
        if self.block_size < 1 or m.shape[0] % self.block_size != 0:
            raise ValueError("matrix size must be a multiple of block_size")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
            raise ValueError("covariance is not symmetric to relative 1e-12")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "_chol", _cholesky_lower(m))

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.size // self.block_size

    def cholesky(self) -> np.ndarray:
        """Lower factor L with L @ L.T == matrix."""
        return self._chol

    def submatrix(self, blocks: Sequence[int]) -> np.ndarray:
        """Principal submatrix at the given block indices, in the given order."""
        blocks = list(blocks)
        if len(set(blocks)) != len(blocks):
            raise InvalidTripletError(f"duplicate block indices in {blocks}")
        for b in blocks:
            if not 0 <= b < self.n_blocks:
                raise InvalidTripletError(f"block index {b} out of range")
        d = self.block_size
        idx = np.concatenate([np.arange(b * d, (b + 1) * d) for b in blocks])
        return self.matrix[np.ix_(idx, idx)]


class CovarianceTiles(NamedTuple):
    """The six named D x D tiles of a symmetric 3D x 3D block matrix.

    Laid out as ``[[u1, ua, ub], [ua.T, u2, uc], [ub.T, uc.T, u3]]``.
    """

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    ua: np.ndarray
    ub: np.ndarray
    uc: np.ndarray


class TripletCovariance(NamedTuple):
    """A triplet's assembled 3D x 3D covariance plus its six named tiles."""

    matrix: np.ndarray
    tiles: CovarianceTiles


def split_triplet_tiles(matrix: np.ndarray, block_size: int) -> CovarianceTiles:
    """Split a 3D x 3D matrix into the six named D x D tiles.

    The caller chooses what to split: the raw covariance, or a (negated)
    inverse of it, depending on which estimator consumes the tiles.
    """
    m = np.asarray(matrix)
    d = block_size
    if m.shape != (3 * d, 3 * d):
        raise ValueError(f"expected a {3 * d} x {3 * d} matrix, got {m.shape}")
    return CovarianceTiles(
        u1=m[0:d, 0:d],
        u2=m[d : 2 * d, d : 2 * d],
        u3=m[2 * d :, 2 * d :],
        ua=m[0:d, d : 2 * d],
        ub=m[0:d, 2 * d :],
        uc=m[d : 2 * d, 2 * d :],
    )


def build_row_covariance(grid: GridSpec, kernel: KernelSpec) -> RowCovariance:
    """Assemble the squared-exponential row covariance over all cells.

    Entry ((i,a),(j,b)) is ``exp(-||pos(i,a) - pos(j,b)||^2 / (2 l^2))`` on
    the absolute cell grid, plus ``jitter`` on the diagonal.
    """
    pos = grid.cell_positions()
    diff = pos[:, None, :] - pos[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    u = np.exp(-sq / (2.0 * kernel.length_scale**2))
    u[np.diag_indices_from(u)] += kernel.jitter
    return RowCovariance(u, grid.block_cells)


def subslice_covariance(
    cov: RowCovariance, blocks: Sequence[int]
) -> TripletCovariance:
    """Extract the 3D x 3D principal submatrix of an ordered block triple.

    Returns the assembled matrix together with the six named tiles. Note the
    tiles here are tiles of the covariance itself; estimators that need tiles
    of a (negated, noise-augmented) inverse must invert first and then call
    :func:`split_triplet_tiles` on the result.
    """
    blocks = list(blocks)
    if len(blocks) != 3:
        raise InvalidTripletError(f"expected exactly three block indices, got {blocks}")
    sub = cov.submatrix(blocks)
    return TripletCovariance(sub, split_triplet_tiles(sub, cov.block_size))


@dataclass(frozen=True, eq=False)
class ChannelField:
    """An ordered collection of equally-shaped D x d block matrices."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(np.asarray(b, dtype=float) for b in self.blocks)
        if not blocks:
            raise ValueError("a channel field needs at least one block")
        shape = blocks[0].shape
        if len(shape) != 2:
            raise ValueError("blocks must be 2-D matrices")
        for b in blocks:
            if b.shape != shape:
                raise ValueError("all blocks must share one shape")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.blocks[0].shape

    def stacked(self) -> np.ndarray:
        """All blocks stacked vertically into one (N*D) x d matrix."""
        return np.vstack(self.blocks)

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, block_size: int) -> "ChannelField":
        stacked = np.asarray(stacked, dtype=float)
        if stacked.shape[0] % block_size != 0:
            raise ValueError("stacked row count must be a multiple of block_size")
        n = stacked.shape[0] // block_size
        return cls(tuple(stacked[i * block_size : (i + 1) * block_size] for i in range(n)))


@dataclass(frozen=True, eq=False)
class PoseSet:
    """Per-block d x d rotations (orthogonal, determinant +1)."""

    poses: tuple

    def __post_init__(self):
        poses = tuple(np.asarray(p, dtype=float) for p in self.poses)
        if not poses:
            raise ValueError("a pose set needs at least one pose")
        d = poses[0].shape[0]
        eye = np.eye(d)
        for p in poses:
            if p.shape != (d, d):
                raise ValueError("all poses must be square with one common size")
            if np.linalg.norm(p.T @ p - eye) >= ORTHOGONALITY_TOL:
                raise ValueError("pose is not orthogonal to 1e-10")
            if abs(np.linalg.det(p) - 1.0) >= ORTHOGONALITY_TOL:
                raise ValueError("pose determinant is not +1")
        object.__setattr__(self, "poses", poses)

    @property
    def n_poses(self) -> int:
        return len(self.poses)

    @property
    def dim(self) -> int:
        return self.poses[0].shape[0]


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Noisy per-block observations together with the noise level used."""

    blocks: tuple
    noise_sigma: float

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        blocks = tuple(np.asarray(b, dtype=float) for b in self.blocks)
        shape = blocks[0].shape
        for b in blocks:
            if b.shape != shape:
                raise ValueError("all observation blocks must share one shape")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_shape(self) -> tuple[int, int]:
        return self.blocks[0].shape


def sample_channel(cov: RowCovariance, antennas: int, rng) -> ChannelField:
    """Draw one channel field from MN(0, U, I).

    The stacked (N*D) x d sample is L @ G for the stored Cholesky factor L
    and i.i.d. standard-normal G, so every column is N(0, U). Deterministic
    for a given rng state.
    """
    rng = np.random.default_rng(rng)
    g = rng.standard_normal((cov.size, antennas))
    return ChannelField.from_stacked(cov.cholesky() @ g, cov.block_size)


def sample_pose_set(n_blocks: int, antennas: int, rng) -> PoseSet:
    """Draw n_blocks rotations Haar-uniformly on SO(d).

    QR of a standard-normal matrix with the sign convention that makes the
    factorization unique (non-negative R diagonal) gives Haar measure on
    O(d); flipping the last column when the determinant is -1 folds the
    reflection component onto SO(d) without disturbing uniformity.
    """
    if antennas < 2:
        raise ValueError("antennas must be >= 2")
    rng = np.random.default_rng(rng)
    poses = []
    for _ in range(n_blocks):
        a = rng.standard_normal((antennas, antennas))
        q, r = np.linalg.qr(a)
        sign = np.sign(np.diag(r))
        sign[sign == 0] = 1.0
        q = q * sign
        if np.linalg.det(q) < 0:
            q = q.copy()
            q[:, -1] = -q[:, -1]
        poses.append(q)
    return PoseSet(tuple(poses))


def apply_precoding(channels: ChannelField, poses: PoseSet) -> ChannelField:
    """Right-multiply every block by its pose: block i becomes H_i @ P_i."""
    if channels.n_blocks != poses.n_poses:
        raise ValueError("channel and pose counts differ")
    if channels.block_shape[1] != poses.dim:
        raise ValueError("pose size does not match the block column count")
    return ChannelField(tuple(h @ p for h, p in zip(channels.blocks, poses.poses)))


def observe(effective: ChannelField, sigma: float, rng) -> ObservationSet:
    """Add i.i.d. Gaussian noise of scale sigma to every block.

    sigma == 0 returns the input blocks bit-exactly.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return ObservationSet(tuple(b.copy() for b in effective.blocks), 0.0)
    rng = np.random.default_rng(rng)
    noisy = tuple(
        b + sigma * rng.standard_normal(b.shape) for b in effective.blocks
    )
    return ObservationSet(noisy, float(sigma))


def log_prior_density(stacked: np.ndarray, cov: RowCovariance) -> float:
    """Log-density of MN(0, U, I) at a stacked (N*D) x d matrix.

    Equals -1/2 tr(H^T U^{-1} H) - (d/2) logdet(2 pi U); invariant under
    right multiplication of H by any orthogonal matrix.
    """
    h = np.asarray(stacked, dtype=float)
    if h.ndim != 2 or h.shape[0] != cov.size:
        raise ValueError(f"expected a matrix with {cov.size} rows, got {h.shape}")
    l = cov.cholesky()
    quad = float(np.sum(h * cho_solve((l, True), h)))
    logdet = 2.0 * float(np.sum(np.log(np.diag(l))))
    d = h.shape[1]
    return -0.5 * quad - 0.5 * d * (cov.size * np.log(2.0 * np.pi) + logdet)
