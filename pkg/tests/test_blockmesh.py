"""Graded 1D grids and tensor-product block meshes.

Checks exact mirror symmetry of the graded interval, wall refinement, the
layer-width rule, and the two-point flux structure of the tensor mesh:
symmetry of the interior couplings and the discrete conservation identity
diffusion_matrix @ 1 + boundary_weights = 0 (a constant field has zero
flux divergence against a matching wall value).
"""
import numpy as np
import pytest
import scipy.sparse as sp

from dualporo import blockmesh as bm


def test_graded_interval_symmetry_and_monotonicity():
    grid = bm.graded_interval(32, 2.0, 0.3)
    assert grid.nodes[0] == 0.0 and grid.nodes[-1] == 2.0
    assert (np.diff(grid.nodes) > 0.0).all()
    mirrored = grid.nodes + grid.nodes[::-1]
    assert np.allclose(mirrored, 2.0, rtol=0.0, atol=1e-14)
    assert grid.n_cells == 32
    assert grid.widths.sum() == pytest.approx(2.0, rel=1e-14)


def test_graded_interval_zero_strength_is_uniform():
    grid = bm.graded_interval(16, 1.0, 0.1,
                              bm.GradingParams(strength=0.0))
    assert np.allclose(grid.nodes, np.linspace(0.0, 1.0, 17), atol=1e-15)


def test_graded_interval_refines_toward_walls():
    grid = bm.graded_interval(64, 1.0, 0.25)
    w = grid.widths
    assert w[0] == pytest.approx(w[-1], rel=1e-12)   # mirror symmetry
    assert w[0] < w.max() / 20.0              # strongly graded at the wall
    # widths grow monotonically through the left layer
    n_layer = np.searchsorted(grid.nodes, grid.layer_width)
    assert (np.diff(w[:n_layer]) > 0.0).all()


def test_graded_interval_validation():
    with pytest.raises(ValueError):
        bm.graded_interval(5, 1.0, 0.1)       # odd cell count
    with pytest.raises(ValueError):
        bm.graded_interval(2, 1.0, 0.1)       # too few cells
    with pytest.raises(ValueError):
        bm.graded_interval(16, 1.0, 0.3)      # layer wider than L/4
    with pytest.raises(ValueError):
        bm.graded_interval(16, 1.0, 0.1,
                           bm.GradingParams(strength=-1.0))


def test_layer_adapted_grid_rule():
    delta = 0.01
    scale = 1e-4                              # squared diffusion length
    grid = bm.layer_adapted_grid(64, delta, scale)
    assert grid.length == pytest.approx(1.0 - delta, rel=1e-15)
    kappa = bm.GradingParams().kappa
    assert grid.layer_width == pytest.approx(
        min(grid.length / 4.0, kappa * np.sqrt(scale)), rel=1e-14)
    # a huge diffusion scale caps the layer at a quarter length
    wide = bm.layer_adapted_grid(64, delta, 1.0)
    assert wide.layer_width == pytest.approx(wide.length / 4.0, rel=1e-14)


def test_layer_adapted_grid_validation():
    with pytest.raises(ValueError):
        bm.layer_adapted_grid(64, 1.5, 1e-4)
    with pytest.raises(ValueError):
        bm.layer_adapted_grid(64, 0.1, -1.0)


def test_dump_grid_round_trip(tmp_path):
    grid = bm.graded_interval(16, 1.0, 0.2)
    path = tmp_path / "grid.txt"
    bm.dump_grid(grid, path)
    back = np.array([float(line) for line in path.read_text().splitlines()])
    assert np.array_equal(back, grid.nodes)


@pytest.mark.parametrize("dimension", [1, 2, 3])
def test_tensor_mesh_volume_and_conservation(dimension):
    delta = 0.05
    grid = bm.layer_adapted_grid(8 if dimension == 3 else 16, delta, 1e-3)
    mesh = bm.tensor_mesh(grid, dimension)
    assert mesh.n_cells == grid.n_cells ** dimension
    assert mesh.total_volume == pytest.approx((1.0 - delta) ** dimension,
                                              rel=1e-13)
    assert mesh.centers.shape == (mesh.n_cells, dimension)
    # constant field + matching wall value has zero discrete divergence
    ones = np.ones(mesh.n_cells)
    div = mesh.diffusion_matrix @ ones + mesh.boundary_weights
    scale = np.abs(mesh.boundary_weights).max()
    assert np.abs(div).max() <= 1e-12 * scale


def test_tensor_mesh_symmetry_and_signs():
    grid = bm.layer_adapted_grid(12, 0.1, 1e-3)
    mesh = bm.tensor_mesh(grid, 2)
    a = mesh.diffusion_matrix
    asym = a - a.T
    worst = np.abs(asym.data).max() if asym.nnz else 0.0
    assert worst <= 1e-12 * np.abs(a.data).max()
    off = (a - sp.diags(a.diagonal())).tocsr()
    off.eliminate_zeros()
    assert (off.data >= 0.0).all()            # off-diagonal couplings >= 0
    assert (a.diagonal() < 0.0).all()
    assert (mesh.boundary_weights >= 0.0).all()
    assert (mesh.boundary_weights > 0.0).sum() == 4 * 12 - 4


def test_tensor_mesh_dimension_validation():
    grid = bm.graded_interval(8, 1.0, 0.2)
    with pytest.raises(ValueError):
        bm.tensor_mesh(grid, 4)
