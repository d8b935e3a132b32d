import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twophase.grid import build_grid, harmonic_face_permeability, interior_face_count


def test_single_cell():
    g = build_grid(1, 1, 1, 1.0, 1.0, 1.0)
    assert g.num_faces == 0
    assert len(g.bface_cell) == 6
    assert g.cell_volume == 1.0


def test_cross_section_counts():
    g = build_grid(100, 20, 1, 762.0, 15.24, 1.0, "z")
    assert g.dx == pytest.approx(7.62)
    assert g.dy == pytest.approx(0.762)
    assert g.num_faces == 19 * 100 + 99 * 20 == 3880


def test_two_cell_line():
    g = build_grid(2, 1, 1, 2.0, 1.0, 1.0)
    assert g.num_faces == 1
    assert g.face_area[0] == 1.0 and g.face_dist[0] == 1.0
    assert tuple(g.face_cells[0]) == (0, 1)


@pytest.mark.parametrize("dims", [(0, 1, 1), (1, -2, 1)])
def test_rejects_bad_counts(dims):
    with pytest.raises(ValueError):
        build_grid(*dims, 1.0, 1.0, 1.0)


def test_rejects_bad_lengths():
    with pytest.raises(ValueError):
        build_grid(2, 2, 2, 1.0, 0.0, 1.0)


def test_depth_follows_gravity_axis():
    g = build_grid(3, 2, 4, 3.0, 2.0, 8.0, "z")
    _, _, k = g.cell_ijk(np.arange(g.num_cells))
    np.testing.assert_allclose(g.cell_depth, (k + 0.5) * 2.0)
    flat = build_grid(3, 2, 4, 3.0, 2.0, 8.0, None)
    assert np.all(flat.cell_depth == 0)


def test_tag_boundary_box():
    g = build_grid(4, 1, 4, 4.0, 1.0, 4.0, "z").tag_boundary("in", "xmin", hi=(0, 1, 2))
    faces = g.boundary_faces("in")
    assert len(faces) == 2
    assert set(g.bface_cell[faces]) == {0, 4}
    with pytest.raises(ValueError):
        g.tag_boundary("x", "xmin", lo=(0, 0, 10))
    with pytest.raises(ValueError):
        g.tag_boundary("x", "left")


def test_harmonic_examples():
    assert harmonic_face_permeability(3e-13, 3e-13, 1.0, 5.0) == pytest.approx(3e-13)
    assert harmonic_face_permeability(1e-13, 1e-15, 1.0, 1.0) == pytest.approx(2e-28 / 1.01e-13, rel=1e-12)
    assert harmonic_face_permeability(1e-13, 0.0, 1.0, 1.0) == 0.0
    assert harmonic_face_permeability(0.0, 0.0, 1.0, 1.0) == 0.0


dims = st.integers(1, 6)


@given(dims, dims, dims)
def test_face_count_formula(nx, ny, nz):
    g = build_grid(nx, ny, nz, 1.0, 2.0, 3.0)
    assert g.num_faces == interior_face_count(nx, ny, nz)
    pairs = {tuple(p) for p in g.face_cells}
    assert len(pairs) == g.num_faces
    assert np.all(g.face_cells[:, 0] < g.face_cells[:, 1])
    assert np.all(g.face_area > 0)
    assert len(g.bface_cell) == 2 * (nx * ny + ny * nz + nx * nz)


perm = st.floats(1e-18, 1e-10)
length = st.floats(0.01, 100.0)


@given(perm, perm, length, length)
def test_harmonic_symmetric(ki, kj, di, dj):
    a = harmonic_face_permeability(ki, kj, di, dj)
    b = harmonic_face_permeability(kj, ki, dj, di)
    assert a == pytest.approx(b, rel=1e-14)


@given(perm, perm, length)
def test_harmonic_bounded(ki, kj, d):
    k = harmonic_face_permeability(ki, kj, d, d)
    assert min(ki, kj) * (1 - 1e-12) <= k <= max(ki, kj) * (1 + 1e-12)
