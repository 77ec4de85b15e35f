import json
from importlib import resources

import pytest

from cstarlab.cli import main, parse_algebra
from cstarlab.errors import ParseError, ShapeError

DATA = resources.files("cstarlab") / "data"


def doc(name):
    return json.loads((DATA / name).read_text())


def test_parse_t2_document():
    shape, gens, names, tol = parse_algebra(doc("t2.json"))
    assert shape.sizes == (2,) and len(gens) == 3 and names == ["p", "e", "q"]
    assert tol.eps_eq == 1e-10


def test_parse_pi_document(pi_id):
    shape, gens, names, _ = parse_algebra(doc("pi_oplus_id_t2.json"))
    assert shape.sizes == (1, 2)
    for g, h in zip(gens, pi_id.generators):
        assert g.allclose(h, 0)


def test_parse_imaginary_parts():
    d = {"shape": [1], "generators": [{"name": "x", "blocks": [{"re": [[1]], "im": [[2]]}]}],
         "tolerances": {"eps_norm": 1e-6}}
    _, gens, _, tol = parse_algebra(d)
    assert gens[0].blocks[0][0, 0] == 1 + 2j
    assert tol.eps_norm == 1e-6


def test_parse_shape_errors():
    d = {"shape": [2], "generators": [{"name": "x", "blocks": [{"re": [[1, 0, 0], [0, 1, 0]]}]}]}
    with pytest.raises(ShapeError) as err:
        parse_algebra(d)
    assert "generators[0].blocks[0]" in str(err.value)
    d = {"shape": [2], "generators": [{"name": "x", "blocks": [{"re": [[1, 0], [0, 1]], "im": [[1]]}]}]}
    with pytest.raises(ShapeError):
        parse_algebra(d)


@pytest.mark.parametrize("bad, where", [
    ([], "$"),
    ({"generators": []}, "$.shape"),
    ({"shape": [2]}, "$.generators"),
    ({"shape": [1], "generators": [{"name": "1x", "blocks": [{"re": [[1]]}]}]}, "name"),
    ({"shape": [1], "generators": [{"name": "x", "blocks": [{"im": [[1]]}]}]}, "blocks[0]"),
    ({"shape": [1], "generators": [{"name": "x", "blocks": [{"re": [["a"]]}]}]}, "blocks[0]"),
    ({"shape": [1], "generators": [{"name": "x", "blocks": [{"re": [[1]]}]}], "tolerances": {"foo": 1}},
     "tolerances"),
])
def test_parse_errors_carry_paths(bad, where):
    with pytest.raises(ParseError) as err:
        parse_algebra(bad)
    assert where in str(err.value)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_shilov_and_envelope_commands(capsys):
    path = str(DATA / "pi_oplus_id_t2.json")
    code, out, _ = run(capsys, "shilov", path)
    assert code == 0 and "Shilov = block 1" in out
    code, out, _ = run(capsys, "envelope", path)
    assert code == 0 and "envelope = M2" in out
    code, out, _ = run(capsys, "boundary-ideals", path)
    assert "{1}: boundary=True" in out and "{2}: boundary=False" in out


def test_covers_commands(capsys):
    path = str(DATA / "pi_oplus_id_t2.json")
    code, out, _ = run(capsys, "covers", "compare", path, "ambient", "envelope")
    assert code == 0 and "relation = first_dominates" in out
    code, out, _ = run(capsys, "covers", "join", path, "ambient", "envelope")
    assert code == 0 and "join = ℂ⊕M2" in out


def test_algebra_and_semidirichlet_commands(capsys):
    path = str(DATA / "t2.json")
    code, out, _ = run(capsys, "algebra", "check", path)
    assert code == 0 and "Dirichlet = True" in out and "dim = 3" in out
    code, out, _ = run(capsys, "semidirichlet", "check", path)
    assert code == 0


def test_extend_and_lattice_commands(capsys):
    path = str(DATA / "pi_oplus_id_t2.json")
    code, out, _ = run(capsys, "extend-shilov", path)
    assert code == 0 and "dim A+I = 4" in out
    code, out, _ = run(capsys, "lattice", "verify", path)
    assert code == 0 and "RESULT: PASS" in out


def test_maximal_command(capsys):
    code, out, _ = run(capsys, "maximal", "test", str(DATA / "pi_oplus_id_t2.json"), "--rep", "ambient")
    assert code == 0 and "status = not_maximal" in out and "valid = True" in out


def test_twist_sweep_csv(tmp_path, capsys):
    target = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "twist", "sweep", "--grid", "5", "--circle", "4", "--csv", str(target))
    assert code == 0
    lines = target.read_bytes().split(b"\n")
    assert lines[0] == b"z_re,z_im,multiplicativity_error,delta"
    assert len([x for x in lines if x]) == 1 + 5 + 3


def test_scenario_commands(tmp_path, capsys):
    code, out, _ = run(capsys, "scenario", "list")
    assert code == 0 and "toeplitz_finite" in out
    csv = tmp_path / "chain.csv"
    code, out, _ = run(capsys, "scenario", "run", "t2_twist_chain", "--param", "s=0.5", "--param", "grid=11",
                       "--csv", str(csv))
    assert code == 0 and out.endswith("RESULT: PASS\n")
    assert csv.read_text().startswith("s,t,index,eigenvalue\n")


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(capsys, "scenario", "run", "nope")[0] == 2
    assert run(capsys, "shilov", str(tmp_path / "missing.json"))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "shilov", str(bad))
    assert code == 2 and "invalid JSON" in err
    bad.write_text(json.dumps({"shape": [2], "generators": [{"name": "x", "blocks": [{"re": [[1]]}]}]}))
    code, _, err = run(capsys, "shilov", str(bad))
    assert code == 2 and "blocks[0]" in err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("CSTARLAB_SEED", "5")
    assert run(capsys, "scenario", "run", "t2_in_m2")[0] == 0
    monkeypatch.setenv("CSTARLAB_SEED", "x")
    assert run(capsys, "scenario", "run", "t2_in_m2")[0] == 2


def test_failing_check_exits_1(tmp_path, capsys):
    # Phi restricted to the identity of T2 leaves both Phi and Phi' semi-Dirichlet
    rep = tmp_path / "rep.json"
    rep.write_text((DATA / "t2.json").read_text())
    code, out, _ = run(capsys, "semidirichlet", "check", str(DATA / "t2.json"), "--rep", str(rep), "--split", "1")
    assert code == 1 and "RESULT: FAIL" in out
