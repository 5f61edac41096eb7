import json

import pytest
from click.testing import CliRunner

from dominotower import domino, witness
from dominotower.affine import AffineMap, PiecewiseAffineSystem
from dominotower.cli import cli, main
from dominotower.towers import TowerPatch

IDENT = PiecewiseAffineSystem([(0, 0)], [AffineMap.identity()])
SHIFT2 = PiecewiseAffineSystem([(0, 0)], [AffineMap.translation(2, 0)])


def run(args, code=0):
    res = CliRunner().invoke(cli, [str(a) for a in args])
    assert res.exit_code == code, res.output
    return res


def report(args):
    return json.loads(run(args).output)


@pytest.fixture
def files(tmp_path):
    (tmp_path / "ident.json").write_text(IDENT.to_json())
    (tmp_path / "shift.json").write_text(SHIFT2.to_json())
    (tmp_path / "empty.json").write_text(domino.DominoInstance([0, 1], ["h", "v"], set()).to_json())
    return tmp_path


def test_empty_theta_unsatisfiable(files):
    rep = report(["tile-patch", files / "empty.json", "--width", 2])
    assert rep["outcome"]["status"] == domino.UNSATISFIABLE


def test_tile_patch_exports(files):
    out = files / "o"
    report(["tile-patch", files / "empty.json", "--width", 3, "--format", "dimacs", "--out", out])
    assert "p cnf" in (out / "patch.cnf").read_text()
    text = (out / "patch.json").read_text()
    assert TowerPatch.from_json(text).to_json() + "\n" == text
    report(["tile-patch", files / "empty.json", "--width", 3, "--format", "dot", "--out", out])
    assert "graph" in (out / "patch.dot").read_text()


def test_shift_sweep(files):
    rep = report(["tile-patch", "--system", files / "shift.json", "--width", 9, "--sweep"])
    assert rep["first_unsatisfiable_width"] is not None and rep["monotone"]


def test_witness_identity_and_extract(files):
    out = files / "w"
    rep = report(["witness", files / "ident.json", "--start", "1/2,1/2", "--height", 4,
                  "--width", 32, "--out", out])
    assert rep["interior_violations"] == 0
    dec_text = (out / "decoration.json").read_text()
    assert witness.Decoration.from_json(dec_text).to_json() + "\n" == dec_text
    ext = report(["extract", out / "decoration.json", "--system", files / "ident.json",
                  "--height", 4, "--width", 32])
    assert ext["identity_holds"] and ext["within_bound"]


def test_compile_tm_and_mortal(files):
    out = files / "tm"
    rep = report(["compile-tm", "zigzag", "--samples", 50, "--out", out])
    assert rep["agrees"] and rep["seed"] == 0
    rep = report(["certify-mortal", out / "system.json"])
    assert rep["result"]["status"] in ("mortal", "unknown")
    halt = files / "halt"
    report(["compile-tm", "halter", "--samples", 5, "--out", halt])
    assert report(["certify-mortal", halt / "system.json"])["result"] == {"status": "mortal", "bound": 1}


def test_compile_tileset(files):
    out = files / "ts"
    rep = report(["compile-tileset", files / "ident.json", "--L", 1, "--out", out])
    assert rep["size"]["colours"] == 100
    inst_text = (out / "dominoes.json").read_text()
    assert domino.DominoInstance.from_json(inst_text).to_json() + "\n" == inst_text


def test_hyp_free():
    rep = report(["hyp", "free2", "-R", 3])
    assert rep["ball"]["spheres"] == [1, 4, 12, 36]


def test_hyp_levels_and_determinism(tmp_path):
    args = ["hyp", "free2", "-R", 5, "--levels", "1,2", "--out", tmp_path]
    a, b = run(args).output, run(args).output
    assert a == b
    rep = json.loads(a)
    assert rep["cones"]["types"] == 5
    assert rep["horospheres"]["2"] == {"vertices": 12, "edges": 0, "components": 12}
    assert (tmp_path / "horosphere_2.json").exists()


def test_hyp_presentation_file(tmp_path):
    p = tmp_path / "f2.txt"
    p.write_text("generators: a b\n")
    assert report(["hyp", p, "-R", 2])["ball"]["size"] == 17


@pytest.mark.parametrize("argv,code", [
    (["tile-patch", "nope.json"], 2),
    (["tile-patch", "--tower", "banana"], 2),
    (["hyp", "nowhere"], 2),
    (["no-such-command"], 2),
])
def test_exit_codes(argv, code):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == code


def test_resource_exit_code(files):
    with pytest.raises(SystemExit) as exc:
        main(["tile-patch", str(files / "empty.json"), "--tower", "qary:3", "--height", 30])
    assert exc.value.code == 3
