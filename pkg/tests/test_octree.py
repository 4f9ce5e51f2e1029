"""Octree construction invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from fmmbem.octree import bounding_cube, build_tree


def _random_points(n, seed):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(n, 3))


def test_bounding_cube_contains_points():
    pts = _random_points(300, 0)
    center, half = bounding_cube(pts)
    assert np.all(np.abs(pts - center) <= half)


@given(n=st.integers(1, 400), n_crit=st.integers(1, 64), seed=st.integers(0, 10))
@settings(max_examples=25, deadline=None)
def test_tree_partitions_bodies(n, n_crit, seed):
    pts = _random_points(n, seed)
    tree = build_tree(pts, n_crit)
    assert sorted(tree.perm) == list(range(n))
    # leaves tile the permuted body range exactly once
    covered = np.zeros(n, dtype=int)
    for leaf in tree.leaves:
        s, c = tree.body_start[leaf], tree.body_count[leaf]
        covered[s:s + c] += 1
    assert np.all(covered == 1)


def test_children_consistent():
    pts = _random_points(500, 3)
    tree = build_tree(pts, 20)
    for cell in range(len(tree.center)):
        kids = tree.children[cell][tree.children[cell] >= 0]
        if len(kids) == 0:
            assert tree.is_leaf[cell]
            continue
        assert tree.body_count[cell] == tree.body_count[kids].sum()
        for k in kids:
            assert tree.parent[k] == cell
            assert tree.level[k] == tree.level[cell] + 1
            np.testing.assert_allclose(tree.half_width[k], tree.half_width[cell] / 2)
            # child cube nests inside the parent cube
            assert np.all(np.abs(tree.center[k] - tree.center[cell])
                          <= tree.half_width[cell])


def test_bodies_inside_their_cells():
    pts = _random_points(400, 4)
    tree = build_tree(pts, 16)
    for leaf in tree.leaves:
        s, c = tree.body_start[leaf], tree.body_count[leaf]
        body = tree.sorted_points[s:s + c]
        assert np.all(np.abs(body - tree.center[leaf]) <= tree.half_width[leaf] * (1 + 1e-12))


def test_n_crit_respected():
    pts = _random_points(1000, 5)
    tree = build_tree(pts, 30)
    assert np.all(tree.body_count[tree.leaves] <= 30)


def test_leaf_of_body_lookup():
    """leaf_of_body maps each sorted body position to the leaf covering it."""
    pts = _random_points(200, 6)
    tree = build_tree(pts, 10)
    for b in range(0, 200, 17):
        leaf = tree.leaf_of_body[b]
        s, c = tree.body_start[leaf], tree.body_count[leaf]
        assert s <= b < s + c
