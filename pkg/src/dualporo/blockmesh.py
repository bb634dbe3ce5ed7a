"""Boundary-layer-graded tensor meshes for the matrix block problems.

The imbibition solution lives in thin layers along the block walls (the
diffusion length sqrt(a*t) is orders of magnitude below the block edge for
small fracture widths), so the 1D node distribution is graded
exponentially toward both ends of the interval and uniform in the middle.
Tensor products of one such 1D grid build the d-dimensional cube mesh,
d in {1, 2, 3}, with two-point flux transmissibilities (Dirichlet walls
handled through half-cell transmissibilities).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GradingParams:
    """Controls of the graded 1D grid.

    strength: exponential grading strength inside the wall layers;
        0 degenerates to the uniform grid.
    kappa: layer width safety factor on the diffusion length.
    layer_fraction: fraction of each half's cells placed inside the layer.
    """

    strength: float = 6.0
    kappa: float = 2.0
    layer_fraction: float = 0.5


@dataclass(frozen=True)
class GradedGrid1D:
    """Symmetric node set on [0, L]: nodes[i] + nodes[n-i] == L."""

    nodes: np.ndarray
    length: float
    layer_width: float
    strength: float

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


def graded_interval(n_cells: int, length: float, layer_width: float,
                    grading: GradingParams = GradingParams()) -> GradedGrid1D:
    """Symmetric grid with exponentially graded wall layers.

    Within each layer of width sigma the node offsets follow
    sigma * (exp(b*u) - 1)/(exp(b) - 1), finest spacing at the wall; the
    interior is uniform. strength b = 0 returns the uniform grid.
    """
    if n_cells < 4 or n_cells % 2:
        raise ValueError("n_cells must be an even number >= 4")
    if not 0.0 < layer_width <= length / 4.0 + 1e-15:
        raise ValueError("layer_width must lie in (0, length/4]")
    b = grading.strength
    if b < 0.0:
        raise ValueError("grading strength must be >= 0")
    if b == 0.0:
        nodes = np.linspace(0.0, length, n_cells + 1)
        return GradedGrid1D(nodes, length, layer_width, b)

    n_half = n_cells // 2
    n_layer = int(round(grading.layer_fraction * n_half))
    n_layer = min(max(n_layer, 2), n_half - 2)
    u = np.arange(n_layer + 1) / n_layer
    layer = layer_width * np.expm1(b * u) / np.expm1(b)
    interior = np.linspace(layer_width, length / 2.0,
                           n_half - n_layer + 1)[1:]
    left = np.concatenate((layer, interior))
    right = (length - left[::-1])[1:]
    nodes = np.concatenate((left, right))
    nodes[n_half] = length / 2.0  # exact symmetry pivot
    return GradedGrid1D(nodes, length, layer_width, b)


def layer_adapted_grid(n_cells: int, delta: float, diffusion_scale: float,
                       grading: GradingParams = GradingParams()) -> GradedGrid1D:
    """Grid on [0, 1-delta] with layer width min(L/4, kappa*sqrt(scale)).

    diffusion_scale is the squared diffusion length a*T_ref of the run the
    grid is built for (block units).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if diffusion_scale < 0.0:
        raise ValueError("diffusion_scale must be >= 0")
    length = 1.0 - delta
    sigma = min(length / 4.0, grading.kappa * np.sqrt(diffusion_scale))
    if sigma <= 0.0:
        sigma = length / 4.0
    return graded_interval(n_cells, length, sigma, grading)


def dump_grid(grid: GradedGrid1D, path) -> None:
    """Plain-text node dump, one coordinate per line."""
    with open(path, "w") as fh:
        for x in grid.nodes:
            fh.write(f"{float(x)!r}\n")


@dataclass
class BlockMesh:
    """Tensor-product cube mesh with two-point flux data.

    diffusion_matrix applies sum_faces T*(v_nb - v_i) per cell for interior
    faces and subtracts the Dirichlet coupling T_b*v_i on wall cells;
    boundary_weights holds those T_b, so the discrete flux divergence of a
    cell field v with uniform wall value g is
        diffusion_matrix @ v + boundary_weights * g.
    """

    grid: GradedGrid1D
    dimension: int
    volumes: np.ndarray
    centers: np.ndarray
    diffusion_matrix: sp.csr_matrix
    boundary_weights: np.ndarray
    total_volume: float = field(init=False)

    def __post_init__(self) -> None:
        self.total_volume = float(self.volumes.sum())

    @property
    def n_cells(self) -> int:
        return len(self.volumes)


def tensor_mesh(grid: GradedGrid1D, dimension: int) -> BlockMesh:
    """Build the d-dimensional cube mesh from one 1D grid per axis."""
    if dimension not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2, or 3")
    w = grid.widths
    c = grid.centers
    n = grid.n_cells
    shape = (n,) * dimension

    axes = [w] * dimension
    vol = axes[0]
    for a in axes[1:]:
        vol = np.multiply.outer(vol, a)
    volumes = vol.reshape(-1)

    idx = np.arange(n ** dimension).reshape(shape)
    rows, cols, vals = [], [], []
    bweights = np.zeros(n ** dimension)

    for axis in range(dimension):
        # cross-sectional area of a face normal to `axis`
        cross = np.ones(shape)
        for other in range(dimension):
            if other == axis:
                continue
            sh = [1] * dimension
            sh[other] = n
            cross = cross * w.reshape(sh)

        lo = [slice(None)] * dimension
        hi = [slice(None)] * dimension
        lo[axis] = slice(0, n - 1)
        hi[axis] = slice(1, n)
        left = idx[tuple(lo)].reshape(-1)
        right = idx[tuple(hi)].reshape(-1)
        dist = c[1:] - c[:-1]
        sh = [1] * dimension
        sh[axis] = n - 1
        t_int = (cross[tuple(lo)] / np.broadcast_to(
            dist.reshape(sh), cross[tuple(lo)].shape)).reshape(-1)
        rows += [left, right, left, right]
        cols += [right, left, left, right]
        vals += [t_int, t_int, -t_int, -t_int]

        # Dirichlet walls: half-cell transmissibility area/(w/2)
        for side, cell_slice in ((0, 0), (1, n - 1)):
            sl = [slice(None)] * dimension
            sl[axis] = cell_slice
            cells = idx[tuple(sl)].reshape(-1)
            half = (c[cell_slice] - grid.nodes[cell_slice]) if side == 0 \
                else (grid.nodes[-1] - c[cell_slice])
            t_b = cross[tuple(sl)].reshape(-1) / half
            np.add.at(bweights, cells, t_b)
            rows.append(cells)
            cols.append(cells)
            vals.append(-t_b)

    mat = sp.coo_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(n ** dimension, n ** dimension)).tocsr()

    grids = np.meshgrid(*([c] * dimension), indexing="ij")
    centers = np.stack([g.reshape(-1) for g in grids], axis=1)
    return BlockMesh(grid=grid, dimension=dimension, volumes=volumes,
                     centers=centers, diffusion_matrix=mat,
                     boundary_weights=bweights)
