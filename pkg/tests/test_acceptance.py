"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import itertools
import json
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest
from click.testing import CliRunner

from dominotower import affine, hypgeo as H
from dominotower.affine import AffineMap, PiecewiseAffineSystem
from dominotower.cli import cli
from dominotower.domino import (DominoInstance, brute_force, check_coloring,
                                decode_cnf_model, export_cnf, parse_dimacs, solve_patch)
from dominotower.errors import InfeasibleError
from dominotower.tileset import (compile_tileset, compute_params, direct_to_coloring,
                                 explicit_dominoes, labels_for, minimal_L, solve_direct)
from dominotower.towers import TowerSpec, VertexSet, build_patch, folner_set, pullback_folner
from dominotower.witness import (HallFailure, beatty, build_witness, extract_orbit, orbit_of,
                                 verify_decoration)

from helpers import SHAPES, witness_cases


def spec_for(q):
    return TowerSpec.grid() if q == 1 else TowerSpec.qary(q)


# 1 -----------------------------------------------------------------------------

def test_criterion_1_beatty(criterion):
    rng = random.Random(1)
    t0 = time.perf_counter()
    ms = np.arange(-100, 101)
    bad = 0
    for _ in range(1000):
        den = rng.randint(1, 997)
        xi = F(rng.randint(0, 4 * den), den)
        lo, hi = xi.numerator // xi.denominator, -(-xi.numerator // xi.denominator)
        vals = [beatty(xi, m) for m in range(-100, 100)]
        bad += sum(v not in (lo, hi) for v in vals)
        # exact check on all intervals [a, b): scale by the denominator
        P = np.concatenate([[0], np.cumsum(vals)]).astype(np.int64)
        p, r = xi.numerator, xi.denominator
        err = r * (P[None, :] - P[:, None]) - (ms[None, :] - ms[:, None]) * p
        upper = np.triu(np.ones_like(err, dtype=bool), 1)
        bad += int(np.count_nonzero(np.abs(err[upper]) >= r))
    dt = time.perf_counter() - t0
    criterion(1, bad == 0 and dt < 10, f"1000 rationals, all intervals in [-100,100], bad={bad}, {dt:.1f}s")


# 2 and 3 ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def witnesses():
    t0 = time.perf_counter()
    out = []
    for sys_, u in witness_cases():
        for q, (height, width) in SHAPES.items():
            params = compute_params(sys_, q)
            patch = build_patch(spec_for(q), height, (0, width))
            dec = build_witness(sys_, orbit_of(sys_, u, height), patch, params, 4 * params.L)
            out.append((sys_, q, params, patch, dec))
    return out, time.perf_counter() - t0


def test_criterion_2_witness_soundness(witnesses, criterion):
    cases, dt = witnesses
    hall = sum(isinstance(d, HallFailure) for *_, d in cases)
    interior = sum(len(verify_decoration(p, d, par, s).interior_violations())
                   for s, q, par, p, d in cases if not isinstance(d, HallFailure))
    allbad = sum(not verify_decoration(p, d, par, s).ok
                 for s, q, par, p, d in cases if not isinstance(d, HallFailure))
    ok = len(cases) == 60 and hall == 0 and interior == 0 and allbad == 0 and dt < 300
    criterion(2, ok, f"20 systems x q in 1,2,3: hall failures={hall}, interior violations={interior}, "
                     f"{dt:.1f}s")


def folner_sets(patch):
    """Interval Folner sets at every level with an interior interval."""
    out = []
    for n in range(patch.height - 1):
        k = 1
        while True:
            try:
                F0 = folner_set(patch, n, k)
            except InfeasibleError:
                break
            out.append(F0)
            k += 1
        lv = patch.levels[n]
        if len(lv) >= 5:
            out.append(VertexSet.of(patch, n, range(lv[0] + 2, lv[0] + 5)))
    return out


def perturb(patch, dec, params, sys_, rng):
    """Swap the data of two adjacent top-level vertices and rebalance the parent carries."""
    top = patch.height - 1
    lv = patch.levels[top]
    q = patch.q
    for _ in range(200):
        k = rng.randrange(len(lv) - 1)
        v, w = lv[k], lv[k + 1]
        dv, dw = dec.data[(top, v)], dec.data[(top, w)]
        if dv == dw:
            continue
        pv, pw = v // q, w // q
        if (top - 1, pv) not in patch.interior or (top - 1, pw) not in patch.interior:
            continue
        new = dec.copy()
        new.data[(top, v)], new.data[(top, w)] = dw, dv
        if pv != pw:
            delta = (F(dw[0] - dv[0]), F(dw[1] - dv[1]))
            c = new.carry(top - 1, pv, pw)
            c = (c[0] - delta[0], c[1] - delta[1])
            new.carries.pop((top - 1, pw, pv), None)
            new.carries[(top - 1, pv, pw)] = c
        if verify_decoration(patch, new, params, sys_).ok:
            return new
    return None


def test_criterion_3_averaging_identity(witnesses, criterion):
    cases, _ = witnesses
    rng = random.Random(3)
    tested = holds = within = 0
    variants = []
    for s, q, par, p, d in cases:
        for F0 in folner_sets(p):
            for step in extract_orbit(p, d, par, s, F0):
                tested += 1
                holds += step.identity_holds
                within += step.residual <= step.bound
    for idx in rng.sample(range(len(cases)), len(cases)):
        if len(variants) == 10:
            break
        s, q, par, p, d = cases[idx]
        new = perturb(p, d, par, s, rng)
        if new is not None and new.data != d.data:
            variants.append((s, q, par, p, new))
    vtested = vholds = 0
    for s, q, par, p, d in variants:
        for F0 in folner_sets(p):
            for step in extract_orbit(p, d, par, s, F0):
                vtested += 1
                vholds += step.identity_holds and step.residual <= step.bound
    ok = tested > 0 and holds == within == tested and len(variants) == 10 and vholds == vtested > 0
    criterion(3, ok, f"{tested} steps on witnesses, {vtested} on 10 perturbed variants; "
                     f"identity failures={tested - holds + vtested - vholds}, bound failures={tested - within}")


# 4 -----------------------------------------------------------------------------

def test_criterion_4_pullback(criterion):
    rng = random.Random(4)
    bad = 0
    for q in (2, 3):
        spec = TowerSpec.qary(q)
        for _ in range(100):
            n = rng.randint(0, 3)
            pool = range(-30, 30)
            Fs = VertexSet.of(spec, n, rng.sample(pool, rng.randint(1, 25)))
            G = pullback_folner(spec, n + 1, Fs)
            bad += len(G) != q * len(Fs) or G.boundary_size > q * q * Fs.boundary_size
    criterion(4, bad == 0, f"200 random sets on q=2,3; failures={bad}")


# 5 -----------------------------------------------------------------------------

def test_criterion_5_tm_conjugacy(criterion):
    rng = random.Random(5)
    bad, counts = 0, {}
    machines = {"right-writer": affine.right_writer(), "zigzag": affine.zigzag(),
                "halter": affine.halter()}
    for name, tm in machines.items():
        comp = affine.compile_tm(tm)
        for _ in range(200):
            cfg = affine.TMConfig(rng.choice(tm.states),
                                  tuple(rng.choice(tm.symbols) for _ in range(20)),
                                  rng.randrange(1, 19))
            res = affine.tm_step_conjugacy(tm, cfg, 20, comp)
            counts[(name, res.status)] = counts.get((name, res.status), 0) + 1
            bad += not res.agrees
    cert = affine.certify_mortal(affine.compile_tm(affine.halter()).system)
    mortal1 = isinstance(cert, affine.Mortal) and cert.bound == 1
    halter_dies = counts.get(("halter", "dies"), 0) == 200
    criterion(5, bad == 0 and mortal1 and halter_dies,
              f"600 configurations, mismatches={bad}, halter Mortal(1)={mortal1}")


# 6 -----------------------------------------------------------------------------

def cnf_models(text):
    n, clauses = parse_dimacs(text)
    count, first = 0, None
    for bits in itertools.product([False, True], repeat=n):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in c) for c in clauses):
            count += 1
            if first is None:
                first = [i + 1 if b else -(i + 1) for i, b in enumerate(bits)]
    return count, first


ENTRIES = [F(-1), F(0), F(1, 2), F(1)]


def test_criterion_6_tileset_cross_check(criterion):
    rng = random.Random(6)
    shapes = {1: [(1, 1), (1, 2), (2, 1), (1, 4), (2, 2), (3, 4), (5, 4), (10, 4)],
              2: [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)]}
    checks = brute = disagree = 0
    for case in range(12):
        q = 1 if case < 8 else 2
        m = AffineMap(*(rng.choice(ENTRIES) for _ in range(4)), rng.choice([F(-1), F(0), F(1)]),
                      rng.choice([F(0), F(1, 2), F(2)]))
        cons = compile_tileset(PiecewiseAffineSystem([(0, 0)], [m]), q, L=1)
        inst, _ = explicit_dominoes(cons)
        for h, w in shapes[q]:
            patch = build_patch(spec_for(q), h, (0, w))
            a = solve_patch(patch, inst)
            b = solve_direct(patch, cons)
            checks += 1
            disagree += a.satisfiable != b.satisfiable
            if a.satisfiable:
                disagree += bool(check_coloring(patch, inst, a.coloring))
            if b.satisfiable:
                disagree += bool(check_coloring(patch, inst, direct_to_coloring(patch, cons, b)))
            if len(inst.colours) ** len(patch.vertices) <= 10**6:
                count, _ = brute_force(patch, inst)
                brute += 1
                disagree += (count > 0) != a.satisfiable
    cnf_bad = 0
    for _ in range(50):
        q = rng.choice([1, 2])
        h, w = rng.choice([(1, 2), (2, 1), (2, 2), (1, 3)] if q == 1 else [(2, 1), (1, 2)])
        patch = build_patch(spec_for(q), h, (0, w))
        k = rng.randint(1, 3)
        while len(patch.vertices) * k > 14:
            k -= 1
        cols = list(range(k))
        labels = labels_for(q)
        trip = {(a, s, b) for a in cols for s in labels for b in cols if rng.random() < 0.6}
        inst = DominoInstance(cols, labels, trip)
        text = export_cnf(patch, inst)
        count, model = cnf_models(text)
        bcount, _ = brute_force(patch, inst)
        sat = solve_patch(patch, inst).satisfiable
        cnf_bad += count != bcount or (count > 0) != sat
        if model is not None:
            cnf_bad += bool(check_coloring(patch, inst, decode_cnf_model(model, inst, len(patch.vertices))))
    criterion(6, disagree == 0 and cnf_bad == 0 and brute > 0,
              f"{checks} patches (explicit vs direct), {brute} with brute force, 50 CNF instances; "
              f"disagreements={disagree + cnf_bad}")


# 7 -----------------------------------------------------------------------------

def small_patches():
    out = []
    for h in range(1, 13):
        for w in range(1, 13):
            if h * w <= 12:
                out.append(build_patch(TowerSpec.grid(), h, (0, w)))
    for q in (2, 3):
        for h in range(1, 4):
            for w in range(1, 13):
                if w * sum(q ** n for n in range(h)) <= 12:
                    out.append(build_patch(TowerSpec.qary(q), h, (0, w)))
    return out


def test_criterion_7_solver_oracle(criterion):
    rng = random.Random(7)
    patches = small_patches()
    bad = runs = 0
    for _ in range(100):
        k = rng.randint(1, 3)
        cols = list(range(k))
        labels = ["h", "v0", "v1", "v2"]
        trip = {(a, s, b) for a in cols for s in labels for b in cols if rng.random() < 0.55}
        inst = DominoInstance(cols, labels, trip)
        for patch in patches:
            count, first = brute_force(patch, inst)
            res = solve_patch(patch, inst)
            runs += 1
            bad += (count > 0) != res.satisfiable
            if res.satisfiable:
                bad += bool(check_coloring(patch, inst, res.coloring))
    criterion(7, bad == 0, f"{len(patches)} patches x 100 instances, mismatches={bad}")


# 8 -----------------------------------------------------------------------------

def test_criterion_8_hyperbolic(surface, criterion):
    notes = []
    f3 = H.ball(H.free_group(2), 3)
    fb = H.ball(H.free_group(2), 6)
    fb.delta = H.estimate_delta(fb) + 1
    fatlas = H.cone_types(fb, 2)
    fgraphs = [H.horosphere_graph(fb, fatlas, n) for n in range(1, 5)]
    free_ok = (f3.spheres == [1, 4, 12, 36] and fatlas.n_types == 5
               and all(len(g.vertices) == 4 * 3 ** (g.level - 1) and not g.edges for g in fgraphs))
    notes.append(f"F2 ok={free_ok}")

    pres = H.surface_group(2)
    piece, sc = H.verify_small_cancellation(pres)
    b, atlas, auto, graphs = surface
    spheres_ok = b.spheres[:4] == [1, 8, 56, 392]
    conn = all(graphs[n].vertices and graphs[n].connected for n in (3, 4, 5))
    contraction = 0
    for n in range(1, 6):
        below = {tuple(e) for e in graphs[n - 1].edges}
        for g, h in graphs[n].edges:
            a, c = graphs[n].successor[g], graphs[n].successor[h]
            contraction += not (a == c or (min(a, c), max(a, c)) in below)
    rep = H.tower_report(b, atlas, [1, 2, 3, 4, 5], graphs=graphs)
    notes.append(f"surface piece={piece}, connected 3-5={conn}, contraction failures={contraction}, "
                 f"L'={rep.L_prime}, growth={rep.growth_ok}")

    t0 = time.perf_counter()
    b5 = H.ball(pres, 5)
    dt = time.perf_counter() - t0
    notes.append(f"R=5 ball {b5.size} elements in {dt:.1f}s")
    ok = (free_ok and piece == 1 and sc and spheres_ok and conn and contraction == 0
          and rep.contraction_ok and rep.L_prime is not None and rep.growth_ok and dt < 120)
    criterion(8, ok, "; ".join(notes))


# 9 -----------------------------------------------------------------------------

def test_criterion_9_mortal_refutation(tmp_path, criterion):
    shift = PiecewiseAffineSystem([(0, 0)], [AffineMap.translation(2, 0)])
    path = tmp_path / "shift.json"
    path.write_text(shift.to_json())
    params = compute_params(shift, 1)
    Lmin = minimal_L(params.M, params.K, params.Dmax)
    runner = CliRunner()
    width, rep = 4, None
    while width <= 64:
        res = runner.invoke(cli, ["tile-patch", "--system", str(path), "--L", str(Lmin),
                                  "--width", str(width), "--sweep"])
        assert res.exit_code == 0, res.output
        rep = json.loads(res.output)
        if rep["first_unsatisfiable_width"] is not None:
            break
        width *= 2
    first = rep["first_unsatisfiable_width"]
    ok = first is not None and rep["monotone"] and params.L == Lmin
    criterion(9, ok, f"L={Lmin} (minimum), search bound {width}, first unsatisfiable width {first}, "
                     f"monotone={rep['monotone']}")
