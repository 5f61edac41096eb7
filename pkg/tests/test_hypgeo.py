import random

import numpy as np
import pytest

from dominotower import hypgeo as H
from dominotower import kernels
from dominotower.errors import DeterminismError, DomainError, ValidationError
from dominotower.towers import build_patch, folner_set


SURF = H.surface_group(2)


def test_presentation_text_format():
    text = "generators: a b c d\n# genus two\nabABcdCD\n"
    p = H.Presentation.parse(text)
    assert p == SURF
    assert H.Presentation.parse(p.to_text()) == p
    with pytest.raises(ValidationError):
        H.Presentation.parse("generators: a b\naAb\n")
    with pytest.raises(ValidationError):
        H.Presentation.parse("generators: a\nab\n")


def test_small_cancellation():
    assert H.verify_small_cancellation(H.free_group(2)) == (0, True)
    assert H.verify_small_cancellation(SURF) == (1, True)
    bad = H.Presentation.from_strings("ab", ["aabb", "aabab"])
    assert not bad.verified and bad.max_piece >= 3


def test_dehn():
    assert H.dehn_reduce(SURF, "abABcdCD") == ""
    assert H.dehn_reduce(SURF, "a") == "a"
    assert not H.is_trivial(SURF, "a")
    assert H.dehn_reduce(SURF, "abABcd") == "dc"
    # multiplying back: abABcd * (dc)^-1 is the relator
    assert H.is_trivial(SURF, "abABcd" + "CD")
    assert H.is_trivial(SURF, "a" + "abABcdCD" + "A")


def test_dehn_rejects_unverified():
    bad = H.Presentation.from_strings("ab", ["aabb", "aabab"])
    with pytest.raises(ValidationError):
        H.dehn_reduce(bad, "ab")
    with pytest.raises(ValidationError):
        H.ball(bad, 2)
    assert H.ball(bad, 2, allow_unverified=True).size > 0


def test_free_ball():
    b = H.ball(H.free_group(2), 3)
    assert b.spheres == [1, 4, 12, 36] and b.size == 53


def test_surface_small_balls():
    assert H.ball(SURF, 3).spheres == [1, 8, 56, 392]
    b4 = H.ball(SURF, 4)
    assert b4.spheres[4] == 2736 < 2744


def test_ball_cap():
    from dominotower.errors import ResourceError
    with pytest.raises(ResourceError):
        H.ball(SURF, 5, cap=1000)


def test_canonical_words_are_shortlex_least():
    b = H.ball(SURF, 4)
    g = b.element("dcDC")
    assert b.word_str(g) == "abAB"
    assert b.element("abAB") == g


def test_ball_agrees_with_dehn():
    b = H.ball(SURF, 5)
    rng = random.Random(5)
    inner = list(b.ball_upto(2))
    for _ in range(300):
        g, h = rng.choice(inner), rng.choice(inner)
        k = b.mult(g, h)
        assert k >= 0
        w = b.word(g) + b.word(h) + H._inv(b.word(k))
        assert H.is_trivial(SURF, w)
    layer = list(b.layer(4))
    for _ in range(300):
        g, h = rng.choice(layer), rng.choice(layer)
        assert H.is_trivial(SURF, b.word(g) + H._inv(b.word(h))) == (g == h)


def test_norm_consistency(surface):
    b = surface[0]
    adj, norm = b.adj, b.norm
    src = np.repeat(np.arange(b.size), b.n_letters)
    dst = adj.reshape(-1)
    ok = dst >= 0
    assert np.all(np.abs(norm[dst[ok]] - norm[src[ok]]) == 1)
    # inverse letters undo each other
    for s in range(b.n_letters):
        col = adj[:, s]
        has = col >= 0
        assert np.all(adj[col[has], s ^ 1] == np.arange(b.size)[has])
    succ = H.successor_array(b)
    assert np.all(norm[succ[1:]] == norm[1:] - 1)


def test_successor_examples(surface):
    f = H.ball(H.free_group(2), 3)
    assert f.word_str(H.successor(f, f.element("ab"))) == "a"
    with pytest.raises(DomainError):
        H.successor(f, 0)
    b = surface[0]
    g = b.element("abAB")
    downs = [s for s in range(8) if b.norm[b.adj[g, s]] == 3]
    assert len(downs) == 2
    assert b.word_str(H.successor(b, g)) == "abA"


def test_estimate_delta():
    assert H.estimate_delta(H.ball(H.free_group(2), 5)) == 0
    assert H.estimate_delta(H.ball(SURF, 3)) == 0
    assert H.estimate_delta(H.ball(SURF, 4)) > 0
    with pytest.raises(ValidationError):
        H.estimate_delta(H.ball(SURF, 2))


def test_free_cone_types(free_ball):
    atlas = H.cone_types(free_ball, 2)
    assert atlas.n_types == 5
    assert atlas.infinite == [True] * 5
    assert len({int(atlas.type_of[g]) for g in free_ball.layer(1)}) == 4


def test_surface_cone_types(surface):
    b, atlas = surface[0], surface[1]
    assert atlas.n_types == 49 and all(atlas.infinite) and not atlas.unresolved
    assert H.cone_types(H.ball(SURF, 7), 3).n_types == 49


def test_determinism_violation_raises():
    with pytest.raises(DeterminismError):
        H.cone_types(H.ball(SURF, 6), 2)


def test_cone_radius_needs_room():
    with pytest.raises(ValidationError):
        H.cone_types(H.ball(SURF, 3), 3)


def test_free_horospheres_edgeless(free_ball):
    atlas = H.cone_types(free_ball, 2)
    g0 = H.horosphere_graph(free_ball, atlas, 0)
    assert g0.vertices == [0] and g0.edges == []
    for n in (1, 2, 3):
        g = H.horosphere_graph(free_ball, atlas, n)
        assert len(g.vertices) == 4 * 3 ** (n - 1) and g.edges == []


def test_surface_horospheres_connected(surface):
    graphs = surface[3]
    for n in (3, 4, 5):
        g = graphs[n]
        assert g.vertices and g.connected
        assert len(g.vertices) == [1, 8, 56, 392, 2736, 19096][n]


def test_fellow_traveller_symmetry(surface):
    b, atlas, auto, graphs = surface
    for gv, hv in graphs[3].edges:
        w = b.walk(b.inverse(hv), b.word(gv))
        st = (int(atlas.type_of[hv]), int(atlas.type_of[gv]), w)
        assert auto.resolve([st])[st]


def test_contraction_exhaustive(surface):
    graphs = surface[3]
    for n in range(2, 6):
        below = set(graphs[n - 1].edges)
        for g, h in graphs[n].edges:
            a, c = graphs[n].successor[g], graphs[n].successor[h]
            assert a == c or (min(a, c), max(a, c)) in below


def test_tower_report(surface):
    b, atlas, _, graphs = surface
    rep = H.tower_report(b, atlas, [2, 3, 4, 5], graphs=graphs)
    assert rep.contraction_ok and not rep.partial
    assert rep.L_prime is not None and rep.L_prime <= atlas.n_types ** 2
    assert rep.growth_ok and rep.growth_checks > 0
    assert [rep.sizes[n] for n in (2, 3, 4, 5)] == sorted(rep.sizes.values())
    assert H.tower_report(b, atlas, [3], graphs=graphs).partial


def test_free_tower_report(free_ball):
    atlas = H.cone_types(free_ball, 2)
    rep = H.tower_report(free_ball, atlas, [1, 2, 3])
    assert rep.contraction_ok and rep.edge_counts == {1: 0, 2: 0, 3: 0}


def test_horosphere_tower_patch_and_folner(surface):
    b, _, _, graphs = surface
    spec = H.horosphere_tower_spec(b, [graphs[n] for n in range(4)])
    patch = build_patch(spec, 4)
    assert len(patch.levels[3]) == 392
    F = folner_set(patch, 3, 2)
    assert 2 * F.boundary_size <= len(F)


def test_exports(surface):
    b, atlas, _, graphs = surface
    assert "doublecircle" in atlas.to_dot(SURF)
    d = graphs[2].to_dict(b)
    assert len(d["vertices"]) == 56 and len(d["edges"]) == 56
    assert graphs[1].to_dot(b).count("--") == 8


def test_bipartite_double():
    assert H.bipartite_double(H.ball(SURF, 3)).cover is False
    fb = H.ball(H.free_group(2), 3)
    assert H.bipartite_double(fb) is fb
    z3 = H.Presentation.from_strings("a", ["aaa"])
    b = H.ball(z3, 3)
    cov = H.bipartite_double(b)
    assert b.size == 3 and cov.size == 6
    src = np.repeat(np.arange(cov.size), cov.n_letters)
    dst = cov.adj.reshape(-1)
    ok = dst >= 0
    assert np.all(np.abs(cov.norm[dst[ok]] - cov.norm[src[ok]]) == 1)


def test_bfs_backends_agree():
    walks = [[] for _ in range(8)]
    for r in H.symmetrized(SURF):
        walks[r[0]].append(H._inv(r[1:]))
    outs = [mod.cayley_bfs(8, walks, 4, 10**6) for mod in kernels.backends().values()]
    for a in outs[1:]:
        for x, y in zip(outs[0][:4], a[:4]):
            assert np.array_equal(x, y)
        assert list(outs[0][4]) == list(a[4])
