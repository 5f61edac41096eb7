"""Command-line entry point; every subcommand prints one JSON report."""

from __future__ import annotations

import json
import random
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import affine, domino, hypgeo, tileset, towers, witness
from .errors import DominoTowerError, UnsupportedError, ValidationError

BUILTIN_MACHINES = {"right-writer": affine.right_writer, "zigzag": affine.zigzag,
                    "halter": affine.halter}
BUILTIN_GROUPS = {"free2": lambda: hypgeo.free_group(2), "surface2": lambda: hypgeo.surface_group(2)}


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)


def _header(command: str, seed=None, **params) -> dict:
    out = {"command": command, "params": {k: v for k, v in params.items() if v is not None}}
    if seed is not None:
        out["seed"] = seed
    return out


class Outputs:
    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def write(self, name: str, text: str):
        if self.dir is not None:
            (self.dir / name).write_text(text)
            self.written.append(name)


def _emit(report: dict, outs: Outputs):
    if outs.written:
        report["files"] = sorted(outs.written)
    text = _dump(report)
    outs.write("report.json", text + "\n")
    click.echo(text)


def _load_presentation(spec: str) -> hypgeo.Presentation:
    if spec in BUILTIN_GROUPS:
        return BUILTIN_GROUPS[spec]()
    path = Path(spec)
    if not path.exists():
        raise ValidationError(f"no presentation file or builtin named {spec!r}")
    return hypgeo.Presentation.parse(path.read_text())


def _hyp_tower(pres, radius, delta, rho, height):
    b = hypgeo.ball(pres, radius)
    b.delta = delta if delta is not None else hypgeo.estimate_delta(b) + 1
    atlas = hypgeo.cone_types(b, rho)
    auto = hypgeo.PairAutomaton(b, atlas, hypgeo._fellow_radius(b, b.delta))
    graphs = [hypgeo.horosphere_graph(b, atlas, n, automaton=auto) for n in range(height)]
    return hypgeo.horosphere_tower_spec(b, graphs)


def parse_tower(text: str, radius=8, delta=None, rho=None, height=1) -> towers.TowerSpec:
    if text == "grid":
        return towers.TowerSpec.grid()
    if text.startswith("qary:"):
        try:
            q = int(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad tower {text!r}") from None
        return towers.TowerSpec.grid() if q == 1 else towers.TowerSpec.qary(q)
    if text.startswith("horosphere:"):
        pres = _load_presentation(text.split(":", 1)[1])
        if delta is not None and float(delta).is_integer():
            delta = int(delta)
        return _hyp_tower(pres, radius, delta, rho, height)
    raise ValidationError(f"unknown tower {text!r}; use grid, qary:<q> or horosphere:<pres>")


def _patch(spec, height, width, base=0):
    if spec.is_line:
        return towers.build_patch(spec, height, (base, base + width))
    return towers.build_patch(spec, height)


def _point(text: str):
    try:
        x, y = text.split(",")
        return (Fraction(x), Fraction(y))
    except ValueError:
        raise ValidationError(f"bad point {text!r}; use x,y with rationals") from None


def _read(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"missing input file {path}")
    return p.read_text()


@click.group()
def cli():
    """Domino problems on towers of graphs."""


def tower_options(f):
    for opt in reversed([
        click.option("--tower", default="grid", show_default=True,
                     help="grid | qary:<q> | horosphere:<presentation file or free2/surface2>"),
        click.option("--height", default=1, show_default=True, type=int),
        click.option("--width", default=8, show_default=True, type=int),
    ]):
        f = opt(f)
    return f


@cli.command("compile-tm")
@click.argument("machine")
@click.option("--samples", default=200, show_default=True, type=int)
@click.option("--window", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None)
def compile_tm_cmd(machine, samples, window, seed, out):
    """Compile a machine (JSON file or builtin name) and check step conjugacy."""
    if machine in BUILTIN_MACHINES:
        tm = BUILTIN_MACHINES[machine]()
    else:
        tm = affine.TuringMachine.from_json(_read(machine))
    if window < 3:
        raise ValidationError("window must be >= 3")
    comp = affine.compile_tm(tm)
    rng = random.Random(seed)
    counts = {}
    for _ in range(samples):
        cfg = affine.TMConfig(rng.choice(tm.states),
                              tuple(rng.choice(tm.symbols) for _ in range(window)),
                              rng.randrange(1, window - 1))
        res = affine.tm_step_conjugacy(tm, cfg, window, comp)
        counts[res.status] = counts.get(res.status, 0) + 1
    outs = Outputs(out)
    outs.write("system.json", comp.system.to_json() + "\n")
    report = _header("compile-tm", seed, machine=machine, samples=samples, window=window)
    report.update({"squares": comp.system.size, "conjugacy": dict(sorted(counts.items())),
                   "agrees": counts.get("mismatch", 0) == 0})
    _emit(report, outs)


@cli.command("certify-mortal")
@click.argument("system")
@click.option("--max-depth", default=64, show_default=True, type=int)
@click.option("--out", default=None)
def certify_mortal_cmd(system, max_depth, out):
    """Run the polygon chain on an affine system JSON file."""
    sys_ = affine.PiecewiseAffineSystem.from_json(_read(system))
    res = affine.certify_mortal(sys_, max_depth)
    report = _header("certify-mortal", system=system, max_depth=max_depth)
    if isinstance(res, affine.Mortal):
        report["result"] = {"status": "mortal", "bound": res.bound}
    else:
        report["result"] = {"status": "unknown", "reason": res.reason, "depth": res.depth}
    _emit(report, Outputs(out))


@cli.command("compile-tileset")
@click.argument("system")
@click.option("--tower", default="grid", show_default=True)
@click.option("--L", "L", default=None, type=int)
@click.option("--out", default=None)
def compile_tileset_cmd(system, tower, L, out):
    """Tileset parameters and size; the explicit domino set when it fits the caps."""
    spec = parse_tower(tower) if not tower.startswith("horosphere:") else None
    if spec is None:
        raise UnsupportedError("compile-tileset supports line towers only")
    sys_ = affine.PiecewiseAffineSystem.from_json(_read(system))
    cons = tileset.compile_tileset(sys_, spec.q, L)
    outs = Outputs(out)
    report = _header("compile-tileset", system=system, tower=tower, L=L)
    report["params"] = cons.params.to_dict()
    report["records"] = cons.record_count()
    try:
        inst, size = tileset.explicit_dominoes(cons)
        report["size"] = size.to_dict()
        outs.write("dominoes.json", inst.to_json() + "\n")
    except DominoTowerError as exc:
        report["size"] = None
        report["explicit"] = str(exc)
    _emit(report, outs)


@cli.command("tile-patch")
@click.argument("instance", required=False)
@tower_options
@click.option("--system", default=None, help="affine system; compiles the tileset instead of INSTANCE")
@click.option("--L", "L", default=None, type=int)
@click.option("--budget", default=10**6, show_default=True, type=int)
@click.option("--sweep", is_flag=True, help="solve widths 1..WIDTH and report the first unsatisfiable one")
@click.option("--delta", default=None, type=float)
@click.option("--rho", default=None, type=int)
@click.option("--radius", default=8, show_default=True, type=int)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "dot", "dimacs"]))
@click.option("--out", default=None)
def tile_patch_cmd(instance, tower, height, width, system, L, budget, sweep, delta, rho,
                   radius, fmt, out):
    """Solve a domino instance on a tower patch."""
    spec = parse_tower(tower, radius, delta, rho, height)
    if (instance is None) == (system is None):
        raise ValidationError("give exactly one of INSTANCE or --system")
    if system is not None:
        cons = tileset.compile_tileset(affine.PiecewiseAffineSystem.from_json(_read(system)),
                                       spec.q, L)
        inst, _ = tileset.explicit_dominoes(cons)
    else:
        inst = domino.DominoInstance.from_json(_read(instance))
    outs = Outputs(out)
    report = _header("tile-patch", instance=instance, system=system, tower=tower,
                     height=height, width=width, L=L, budget=budget)
    if sweep:
        if not spec.is_line:
            raise UnsupportedError("width sweeps need a line tower")
        rows = []
        for w in range(1, width + 1):
            res = domino.solve_patch(_patch(spec, height, w), inst, budget)
            rows.append({"width": w, "status": res.status, "nodes": res.nodes})
        sats = [r["status"] == domino.SATISFIABLE for r in rows]
        unsat = [r["width"] for r in rows if r["status"] == domino.UNSATISFIABLE]
        report["sweep"] = rows
        report["first_unsatisfiable_width"] = unsat[0] if unsat else None
        report["monotone"] = all(a or not b for a, b in zip(sats, sats[1:]))
        _emit(report, outs)
        return
    patch = _patch(spec, height, width)
    res = domino.solve_patch(patch, inst, budget)
    report["outcome"] = res.to_dict()
    outs.write("patch.json", patch.to_json() + "\n")
    if fmt == "dot":
        outs.write("patch.dot", patch.to_dot(res.coloring))
    elif fmt == "dimacs":
        outs.write("patch.cnf", domino.export_cnf(patch, inst))
    _emit(report, outs)


def _system_and_params(system, q, L):
    sys_ = affine.PiecewiseAffineSystem.from_json(_read(system))
    return sys_, tileset.compute_params(sys_, q, L)


@cli.command("witness")
@click.argument("system")
@click.option("--start", required=True, help="orbit start point x,y")
@tower_options
@click.option("--L", "L", default=None, type=int)
@click.option("--margin", default=None, type=int)
@click.option("--out", default=None)
def witness_cmd(system, start, tower, height, width, L, margin, out):
    """Decorate a patch along an orbit, match carries and verify."""
    spec = parse_tower(tower)
    if not spec.is_line:
        raise UnsupportedError("witness construction needs a line tower")
    sys_, params = _system_and_params(system, spec.q, L)
    orb = witness.orbit_of(sys_, _point(start), height)
    patch = _patch(spec, height, width)
    dec = witness.build_witness(sys_, orb, patch, params, margin)
    outs = Outputs(out)
    report = _header("witness", system=system, start=start, tower=tower, height=height,
                     width=width, L=params.L, margin=margin)
    report["params"] = params.to_dict()
    if isinstance(dec, witness.HallFailure):
        report["hall_failure"] = {"level": dec.level, "coordinate": dec.coordinate,
                                  "kind": dec.kind, "vertices": list(dec.vertices),
                                  "demand": dec.demand, "supply": dec.supply}
        _emit(report, outs)
        sys.exit(4)
    ver = witness.verify_decoration(patch, dec, params, sys_)
    outs.write("decoration.json", dec.to_json() + "\n")
    report["verification"] = ver.to_dict()
    report["interior_violations"] = len(ver.interior_violations())
    _emit(report, outs)


@cli.command("extract")
@click.argument("decoration")
@click.option("--system", required=True)
@tower_options
@click.option("--L", "L", default=None, type=int)
@click.option("--k", "k", default=2, show_default=True, type=int, help="Folner ratio at level 0")
@click.option("--out", default=None)
def extract_cmd(decoration, system, tower, height, width, L, k, out):
    """Folner averages of a decoration and the exact per-level identity."""
    spec = parse_tower(tower)
    sys_, params = _system_and_params(system, spec.q, L)
    dec = witness.Decoration.from_json(_read(decoration))
    patch = _patch(spec, height, width)
    F0 = towers.folner_set(patch, 0, k)
    steps = witness.extract_orbit(patch, dec, params, sys_, F0)
    report = _header("extract", decoration=decoration, system=system, tower=tower,
                     height=height, width=width, L=params.L, k=k)
    report["steps"] = [s.to_dict() for s in steps]
    report["identity_holds"] = all(s.identity_holds for s in steps)
    report["within_bound"] = all(s.residual <= s.bound for s in steps)
    _emit(report, Outputs(out))


@cli.command("hyp")
@click.argument("presentation")
@click.option("--radius", "-R", default=4, show_default=True, type=int)
@click.option("--delta", default=None, type=float, help="working delta (default: estimate + 1)")
@click.option("--rho", default=None, type=int, help="cone radius (default: max(2 delta, 2))")
@click.option("--levels", default="", help="comma separated horosphere levels")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--format", "fmt", default="json", type=click.Choice(["json", "dot"]))
@click.option("--out", default=None)
def hyp_cmd(presentation, radius, delta, rho, levels, seed, fmt, out):
    """Ball, cone types, horosphere graphs and the tower report."""
    pres = _load_presentation(presentation)
    if delta is not None and float(delta).is_integer():
        delta = int(delta)
    b = hypgeo.ball(pres, radius)
    outs = Outputs(out)
    report = _header("hyp", seed, presentation=presentation, radius=radius, delta=delta,
                     rho=rho, levels=levels or None)
    report["small_cancellation"] = {"verified": pres.verified, "max_piece": pres.max_piece}
    report["ball"] = {"spheres": b.spheres, "size": b.size}
    lv = [int(x) for x in levels.split(",") if x.strip()]
    if radius >= 3:
        est = hypgeo.estimate_delta(b, seed=seed)
        report["delta_estimate"] = est
        b.delta = delta if delta is not None else est + 1
        report["delta"] = b.delta
    elif delta is not None:
        b.delta = delta
    if b.delta is None or (rho is not None and rho > radius - 1) or \
            max(2 * b.delta, 2) > radius - 1 and rho is None:
        _emit(report, outs)
        return
    atlas = hypgeo.cone_types(b, rho)
    report["cones"] = {"rho": atlas.rho, "types": atlas.n_types,
                       "infinite": sum(atlas.infinite), "typed_upto": atlas.typed_upto}
    outs.write("cones.json", _dump(atlas.to_dict()) + "\n")
    if fmt == "dot":
        outs.write("cones.dot", atlas.to_dot(pres))
    if lv:
        auto = hypgeo.PairAutomaton(b, atlas, hypgeo._fellow_radius(b, b.delta))
        graphs = {}
        for n in sorted(set(lv) | {x - 1 for x in lv if x > 0}):
            graphs[n] = hypgeo.horosphere_graph(b, atlas, n, automaton=auto)
        report["horospheres"] = {str(n): {"vertices": len(graphs[n].vertices),
                                          "edges": len(graphs[n].edges),
                                          "components": len(graphs[n].components())}
                                 for n in lv}
        for n in lv:
            if fmt == "dot":
                outs.write(f"horosphere_{n}.dot", graphs[n].to_dot(b))
            else:
                outs.write(f"horosphere_{n}.json", _dump(graphs[n].to_dict(b)) + "\n")
        rep = hypgeo.tower_report(b, atlas, sorted(graphs), b.delta, graphs, seed=seed)
        report["tower"] = rep.to_dict()
    _emit(report, outs)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except DominoTowerError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    return 0


if __name__ == "__main__":
    main()
