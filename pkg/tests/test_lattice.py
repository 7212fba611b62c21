"""Geometry invariants for the open-boundary square lattice."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from z2vqe.lattice import build_lattice, loop_boundary_links, wilson_rectangle


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_counts(d):
    g = build_lattice(d)
    assert g.n_links == d * d + (d - 1) * (d - 1)
    assert g.n_plaquettes == d * (d - 1)
    assert len(g.vertices) == d * (d - 1)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_plaquette_link_counts(d):
    g = build_lattice(d)
    for p, links in enumerate(g.plaquettes):
        c, r = g.plaq_coords[p]
        expected = 3 if r in (0, d - 1) else 4
        assert len(links) == expected
        assert len(set(links)) == expected


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_incidence_consistency(d):
    g = build_lattice(d)
    for p, links in enumerate(g.plaquettes):
        assert set(np.nonzero(g.incidence[:, p])[0]) == set(links)
    for l in range(g.n_links):
        assert set(g.link_adjacency[l]) == \
            set(np.nonzero(g.incidence[l])[0].tolist())
        # a link touches at most two faces
        assert 1 <= len(g.link_adjacency[l]) <= 2


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_vertex_operators_commute_with_plaquettes(d):
    # X-type vertex set and Z-type plaquette set must share an even number
    # of links, otherwise the two operators would anticommute
    g = build_lattice(d)
    for v in g.vertices:
        for links in g.plaquettes:
            assert len(set(v) & set(links)) % 2 == 0


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_dual_path_overlap_parity(d):
    # the string to plaquette n crosses plaquette m's boundary an odd
    # number of times iff m == n; this is what makes the correction local
    g = build_lattice(d)
    for n in range(g.n_plaquettes):
        path = set(g.dual_paths[n])
        for m in range(g.n_plaquettes):
            overlap = len(path & set(g.plaquettes[m]))
            assert overlap % 2 == (1 if m == n else 0)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_logical_path_crosses_all_columns(d):
    g = build_lattice(d)
    assert len(g.logical_x_path) == d
    # even overlap with every plaquette: the logical string commutes with
    # all plaquette operators
    for links in g.plaquettes:
        assert len(set(g.logical_x_path) & set(links)) % 2 == 0


def test_wilson_rectangle_boundary():
    g = build_lattice(4)
    mask = wilson_rectangle(g, 2, 2, g.plaq_index(0, 1))
    boundary = loop_boundary_links(g, mask)
    # 2x2 block: perimeter of 8 links
    assert len(boundary) == 8
    with pytest.raises(ValueError):
        wilson_rectangle(g, 4, 1, 0)


def test_bulk_plaquettes():
    g3 = build_lattice(3)
    assert g3.bulk_plaquettes() == [g3.plaq_index(0, 1), g3.plaq_index(1, 1)]
    g2 = build_lattice(2)
    assert g2.bulk_plaquettes() == [0, 1]


@settings(max_examples=20, deadline=None)
@given(d=st.integers(min_value=2, max_value=6))
def test_plaquette_indexing_roundtrip(d):
    g = build_lattice(d)
    for p in range(g.n_plaquettes):
        c, r = g.plaq_coords[p]
        assert g.plaq_index(c, r) == p
