import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from mtsketch.errors import StructureError
from mtsketch.field import ScalarGrid
from mtsketch.mtree import MergeTree, WeightedTree, extract_merge_tree, simplify, validate
from treegen import random_merge_tree


def test_1x4_example():
    T = extract_merge_tree(ScalarGrid(4, 1, [3.0, 1.0, 2.0, 0.0]))
    values = {T.value(i) for i in T.leaves()}
    assert values == {0.0, 1.0}
    assert T.value(T.root) == 3.0
    saddles = [i for i in T.ids if i != T.root and i not in T.leaves()]
    assert [T.value(s) for s in saddles] == [2.0]
    assert validate(T) == []


def test_constant_grid_single_node():
    T = extract_merge_tree(ScalarGrid(3, 3, np.ones(9)))
    assert len(T) == 1 and T.edges == []


def test_monotone_ramp_two_nodes():
    T = extract_merge_tree(ScalarGrid(6, 1, np.arange(6.0)))
    assert len(T) == 2
    assert T.value(T.root) == 5.0 and T.value(T.leaves()[0]) == 0.0


def _sublevel_leaf_oracle(values, width, height, connectivity):
    """Count minimum basins from the connected components of every sublevel set.

    At each distinct level ``a`` a component of ``{f <= a}`` is a new basin
    when it holds no cell below ``a``.
    """
    grid = values.reshape(height, width)
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    births = 0
    for a in np.unique(values):
        labels, count = ndimage.label(grid <= a, structure=structure)
        if count:
            lows = ndimage.minimum(grid, labels, index=np.arange(1, count + 1))
            births += int(np.sum(np.asarray(lows) == a))
    return births


@pytest.mark.parametrize("connectivity", [4, 8])
def test_leaf_count_matches_sublevel_oracle(connectivity):
    rng = np.random.default_rng(connectivity)
    for _ in range(40):
        w, h = rng.integers(1, 9, size=2)
        vals = rng.integers(0, 6, size=w * h).astype(float)  # many ties
        T = extract_merge_tree(ScalarGrid(int(w), int(h), vals), connectivity)
        assert len(T.leaves()) == _sublevel_leaf_oracle(vals, int(w), int(h), connectivity)
        assert validate(T) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 7), st.integers(1, 7), st.data())
def test_extract_always_valid(w, h, data):
    vals = data.draw(st.lists(st.floats(-10, 10), min_size=w * h, max_size=w * h))
    T = extract_merge_tree(ScalarGrid(w, h, vals))
    assert validate(T) == []
    assert T.value(T.root) == max(vals)


def test_validate_examples():
    ok = MergeTree([0, 1, 2], np.array([0.0, 1.0, 2.0]), [(0, 2), (1, 2)], 2)
    assert validate(ok) == []
    cyc = MergeTree([0, 1, 2], np.array([0.0, 1.0, 2.0]), [(0, 1), (1, 2), (2, 0)], 2)
    assert any("cycle" in v or "acyclic" in v or "edges" in v for v in validate(cyc))
    low_root = MergeTree([0, 1], np.array([1.0, 0.0]), [(0, 1)], 1)
    assert validate(low_root)


def test_json_round_trip_bit_exact(rng):
    T = random_merge_tree(rng, 6)
    again = MergeTree.from_json(T.to_json({"column": 1}))
    assert again.ids == T.ids and again.edges == T.edges and again.root == T.root
    assert again.f.tobytes() == T.f.tobytes()


def test_simplify_path_splices_internal():
    path = WeightedTree([0, 1, 2], [(0, 1, 1.0), (1, 2, 1.0)], root=0)
    out = simplify(path, 0.5, 0.1)
    assert out.ids == [0, 2]
    assert out.edges == [(0, 2, 2.0)]


def test_simplify_merges_near_leaf():
    R = 10.0
    star = WeightedTree([0, 1, 2, 3], [(0, 1, 5.0), (0, 2, 5.0), (0, 3, 1e-9 * R)], root=0)
    out = simplify(star, 1.0, 1.0)
    assert 3 not in out.ids
    assert 3 in out.members[0]


def test_simplify_fixed_point():
    tree = WeightedTree([0, 1, 2, 3], [(0, 1, 5.0), (0, 2, 6.0), (0, 3, 7.0)], root=1)
    out = simplify(tree, 0.5, 0.5)
    assert sorted(out.ids) == [0, 1, 2, 3]
    assert sorted(out.edges) == sorted(tree.edges)


def test_simplify_tracks_root():
    tree = WeightedTree([0, 1, 2, 3], [(0, 1, 1e-12), (1, 2, 5.0), (1, 3, 6.0)], root=0)
    out = simplify(tree)
    assert out.root in out.ids
    assert 0 in out.members[out.root]


def test_simplify_rejects_non_tree():
    cyc = WeightedTree([0, 1, 2], [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    with pytest.raises(StructureError):
        simplify(cyc)


def test_simplify_never_grows_and_keeps_weights_nonnegative(rng):
    for _ in range(30):
        T = random_merge_tree(rng, int(rng.integers(2, 8))).to_weighted()
        out = simplify(T, 1.0, 1.0)
        assert len(out) <= len(T)
        assert all(w >= 0 for _, _, w in out.edges)


def test_simplify_degree2_only_preserves_distances(rng):
    # a merge tree with one extra regular node inserted on every edge
    for _ in range(20):
        T = random_merge_tree(rng, int(rng.integers(2, 6))).to_weighted()
        nxt = max(T.ids) + 1
        ids, edges = list(T.ids), []
        for u, v, w in T.edges:
            ids.append(nxt)
            edges += [(u, nxt, w / 2), (nxt, v, w / 2)]
            nxt += 1
        padded = WeightedTree(ids, edges, T.root)
        out = simplify(padded, 1e-6, 1e-6)
        D_in = padded.distances()
        D_out = out.distances()
        pos_in = {x: i for i, x in enumerate(padded.ids)}
        pos_out = {x: i for i, x in enumerate(out.ids)}
        for a in out.ids:
            for b in out.ids:
                assert abs(D_out[pos_out[a], pos_out[b]] - D_in[pos_in[a], pos_in[b]]) <= 1e-12
