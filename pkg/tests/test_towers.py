import pytest
from hypothesis import given, settings, strategies as st

from dominotower.errors import DomainError, InfeasibleError, ResourceError, ValidationError
from dominotower.towers import (TowerPatch, TowerSpec, VertexSet, build_patch, folner_set,
                                pullback_folner)


def test_qary_level_sizes():
    p = build_patch(TowerSpec.qary(2), 3, (0, 4))
    assert [len(lv) for lv in p.levels] == [4, 8, 16]


def test_grid_patch_vertical_edges_are_identity():
    p = build_patch(TowerSpec.grid(), 5, (0, 10))
    assert len(p.vertices) == 50
    for c, par, j in p.vertical:
        (n, v), (n2, w) = p.vertices[c], p.vertices[par]
        assert n2 == n - 1 and v == w and j == 0


def test_qary_parents_are_floor_division():
    p = build_patch(TowerSpec.qary(3), 2, (0, 2))
    assert p.levels[1] == list(range(6))
    for m in range(6):
        assert p.parent(1, m) == m // 3
        assert p.spec.child_index(1, m) == m % 3


def test_interior_requires_full_star():
    p = build_patch(TowerSpec.qary(2), 3, (0, 4))
    assert (0, 0) not in p.interior  # left neighbour missing
    assert (0, 1) in p.interior
    assert not any(n == 2 for n, _ in p.interior)
    for n, v in p.interior:
        assert len(p.children(n, v)) == 2


def test_horizontal_edges_stay_in_level():
    p = build_patch(TowerSpec.qary(2), 3, (0, 3))
    for i, j in p.horizontal:
        assert p.vertices[i][0] == p.vertices[j][0]
        assert p.vertices[j][1] == p.vertices[i][1] + 1


def test_contraction_property_on_qary():
    p = build_patch(TowerSpec.qary(3), 3, (0, 3))
    for i, j in p.horizontal:
        (n, v), (_, w) = p.vertices[i], p.vertices[j]
        if n == 0:
            continue
        a, b = p.parent(n, v), p.parent(n, w)
        assert a == b or abs(a - b) == 1


def test_patch_cap():
    with pytest.raises(ResourceError):
        build_patch(TowerSpec.qary(3), 8, (0, 100), vertex_cap=1000)


def test_bad_inputs():
    with pytest.raises(ValidationError):
        build_patch(TowerSpec.grid(), 0, (0, 4))
    with pytest.raises(ValidationError):
        build_patch(TowerSpec.grid(), 2, (3, 3))
    with pytest.raises(ValidationError):
        TowerSpec.qary(0)


def test_folner_interval():
    F = folner_set(TowerSpec.grid(), 0, 3)
    assert sorted(F.members) == list(range(6))
    assert F.boundary_size == 2


def test_folner_qary_k10():
    F = folner_set(TowerSpec.qary(2), 0, 10)
    assert sorted(F.members) == list(range(20))


def test_folner_infeasible_in_small_patch():
    p = build_patch(TowerSpec.grid(), 1, (0, 5))
    with pytest.raises(InfeasibleError) as exc:
        folner_set(p, 0, 3)
    assert exc.value.needed == 8


def test_pullback_examples():
    spec = TowerSpec.qary(2)
    F = VertexSet.of(spec, 0, range(5))
    G = pullback_folner(spec, 1, F)
    assert sorted(G.members) == list(range(10))
    spec3 = TowerSpec.qary(3)
    G3 = pullback_folner(spec3, 1, VertexSet.of(spec3, 0, [2]))
    assert sorted(G3.members) == [6, 7, 8]
    assert G3.boundary_size == 2
    g = TowerSpec.grid()
    F = VertexSet.of(g, 0, [3, 4, 7])
    G = pullback_folner(g, 1, F)
    assert G.members == F.members and G.boundary_size == F.boundary_size


def test_pullback_wrong_level():
    spec = TowerSpec.qary(2)
    with pytest.raises(DomainError):
        pullback_folner(spec, 2, VertexSet.of(spec, 0, [0]))


def test_custom_tower_validation():
    verts = [[0, 1], [0, 1, 2, 3]]
    edges = [[(0, 1)], [(0, 1), (1, 2), (2, 3)]]
    parents = [{}, {0: 0, 1: 0, 2: 1, 3: 1}]
    spec = TowerSpec.custom(verts, edges, parents, 2)
    p = build_patch(spec, 2)
    assert len(p.vertices) == 6
    with pytest.raises(ValidationError):
        TowerSpec.custom(verts, edges, [{}, {0: 0, 1: 0, 2: 0, 3: 1}], 2)
    with pytest.raises(ValidationError):
        # edge (0,3) maps to (0,1): fine; edge between far parents is not
        TowerSpec.custom([[0, 1, 2], [0, 1, 2, 3, 4, 5]], [[(0, 1), (1, 2)], [(0, 5)]],
                         [{}, {0: 0, 1: 0, 2: 1, 3: 1, 4: 2, 5: 2}], 2)


def test_custom_folner_ball():
    n = 12
    verts = [list(range(n))]
    edges = [[(i, (i + 1) % n) for i in range(n)]]
    spec = TowerSpec.custom(verts, edges, [{}], 1)
    F = folner_set(spec, 0, 2)
    assert 2 * F.boundary_size <= len(F)
    assert len(F) == 5


def test_json_round_trip_is_byte_identical():
    p = build_patch(TowerSpec.qary(2), 3, (1, 4))
    text = p.to_json()
    again = TowerPatch.from_json(text)
    assert again.to_json() == text
    assert again.vertices == p.vertices and again.interior == p.interior


def test_dot_export():
    p = build_patch(TowerSpec.qary(2), 2, (0, 2))
    dot = p.to_dot()
    assert "n2 -> n0" in dot and "dir=none" in dot


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3]), st.lists(st.integers(0, 40), min_size=1, max_size=15))
def test_pullback_law(q, members):
    spec = TowerSpec.qary(q)
    F = VertexSet.of(spec, 0, members)
    G = pullback_folner(spec, 1, F)
    assert len(G) == q * len(F)
    assert G.boundary_size <= q * q * F.boundary_size


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([1, 2, 3]), st.integers(1, 3), st.integers(1, 6))
def test_q_regularity_and_neighbourhood(q, height, width):
    spec = TowerSpec.grid() if q == 1 else TowerSpec.qary(q)
    p = build_patch(spec, height, (0, width))
    for n, v in p.interior:
        assert len(p.children(n, v)) == q
    F = VertexSet.of(p, 0, p.levels[0][: max(1, width // 2)])
    assert F.members <= F.neighbourhood
    for v, w in F.boundary:
        assert v in F.members and w not in F.members


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30))
def test_folner_law(k):
    for spec in (TowerSpec.grid(), TowerSpec.qary(2)):
        F = folner_set(spec, 0, k)
        assert k * F.boundary_size <= len(F)
