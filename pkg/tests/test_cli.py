import json
from fractions import Fraction

import pytest

from twsc.cli import main


@pytest.fixture
def ktree(tmp_path):
    inst, td = tmp_path / "inst.json", tmp_path / "td.json"
    assert main(["gen", "ktree", "--n", "9", "--r", "2", "--seed", "7", "--demands", "4",
                 "--instance-out", str(inst), "--td-out", str(td)]) == 0
    return tmp_path, inst, td


def solve(tmp_path, inst, td, mode="rational"):
    sol = tmp_path / f"sol-{mode}.json"
    assert main(["solve", "--instance", str(inst), "--decomposition", str(td), "--mode", mode,
                 "--solution-out", str(sol)]) == 0
    return sol


def test_gen_is_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        inst, td = tmp_path / f"{name}-i.json", tmp_path / f"{name}-t.json"
        assert main(["gen", "ktree", "--n", "12", "--r", "2", "--seed", "7",
                     "--instance-out", str(inst), "--td-out", str(td)]) == 0
        outs.append((inst.read_bytes(), td.read_bytes()))
    assert outs[0] == outs[1]


def test_gen_maxcut(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"n": 4, "edges": [[0, 1], [1, 2], [2, 3]]}))
    inst = tmp_path / "i.json"
    assert main(["gen", "maxcut", "--input", str(g), "--instance-out", str(inst),
                 "--td-out", str(tmp_path / "t.json")]) == 0
    assert json.loads(inst.read_text())["n"] == 6


def test_pipeline(ktree, capsys):
    tmp_path, inst, td = ktree
    sol = solve(tmp_path, inst, td)
    solf = solve(tmp_path, inst, td, "float")
    exact = Fraction(json.loads(sol.read_text())["objective"])
    approx = float(json.loads(solf.read_text())["objective"])
    assert abs(float(exact) - approx) <= 1e-6

    cut = tmp_path / "cut.json"
    assert main(["round", "--instance", str(inst), "--decomposition", str(td), "--solution", str(sol),
                 "--derandomize", "--c", "1/100", "--cut-out", str(cut)]) == 0
    assert Fraction(json.loads(cut.read_text())["sparsity"]) <= 100 * exact

    capsys.readouterr()
    assert main(["report", "--instance", str(inst), "--decomposition", str(td), "--solution", str(sol),
                 "--cut", str(cut), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert Fraction(rep["sparsity/optimum"]) >= 1
    for row in rep["demands"]:
        if row["ratio"] != "-":
            assert Fraction(row["ratio"]) >= Fraction(1, 100)


def test_round_with_seed_is_reproducible(ktree):
    tmp_path, inst, td = ktree
    sol = solve(tmp_path, inst, td)
    outs = []
    for name in ("a", "b"):
        cut = tmp_path / f"{name}.json"
        assert main(["round", "--instance", str(inst), "--decomposition", str(td), "--solution", str(sol),
                     "--seed", "1", "--cut-out", str(cut)]) == 0
        outs.append(cut.read_bytes())
    assert outs[0] == outs[1]


def test_markov_command(ktree, capsys):
    tmp_path, inst, td = ktree
    sol = solve(tmp_path, inst, td)
    data = json.loads(inst.read_text())
    tdd = json.loads(td.read_text())
    bags = [set(b) for b in tdd["bags"]]
    pair = next((u, v) for u in range(data["n"]) for v in range(u + 1, data["n"])
                if not any(u in b and v in b for b in bags))
    capsys.readouterr()
    chain = tmp_path / "chain.json"
    assert main(["markov", "--instance", str(inst), "--decomposition", str(td), "--solution", str(sol),
                 "--pair", str(pair[0]), str(pair[1]), "--chain-out", str(chain), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    phi = [Fraction(x) for x in rep["phi"]]
    assert all(a >= b for a, b in zip(phi, phi[1:]))
    assert Fraction(rep["max_flow"]) >= Fraction(rep["lp_flow"])
    assert Fraction(rep["cut_capacity"]) >= Fraction(rep["max_flow"])
    assert "layers" in json.loads(chain.read_text())


def test_lowerbound_command(tmp_path, capsys):
    capsys.readouterr()
    assert main(["lowerbound", "--k", "4", "--N", "160", "--eps", "1/400", "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["flow"] == "39/100"
    assert main(["lowerbound", "--k", "4", "--N", "160", "--eps", "1/300"]) == 2
    files = [tmp_path / n for n in ("i.json", "t.json", "s.json")]
    assert main(["lowerbound", "--k", "4", "--N", "12", "--eps", "1/40", "--to-instance",
                 "--instance-out", str(files[0]), "--td-out", str(files[1]),
                 "--solution-out", str(files[2])]) == 0
    cut = tmp_path / "cut.json"
    assert main(["round", "--instance", str(files[0]), "--decomposition", str(files[1]),
                 "--solution", str(files[2]), "--seed", "3", "--cut-out", str(cut)]) == 0


def test_decompose_and_oracle(ktree, capsys):
    tmp_path, inst, td = ktree
    out = tmp_path / "found.json"
    assert main(["decompose", "--instance", str(inst), "--r", "2", "--td-out", str(out)]) == 0
    assert main(["decompose", "--instance", str(inst), "--check", str(out)]) == 0
    capsys.readouterr()
    assert main(["oracle", "--instance", str(inst), "--json"]) == 0
    assert "optimum" in json.loads(capsys.readouterr().out)


def test_exit_codes(ktree, tmp_path, monkeypatch):
    _, inst, td = ktree
    assert main(["round", "--instance", str(inst), "--decomposition", str(td),
                 "--solution", str(tmp_path / "missing.json")]) == 2
    assert main(["bogus"]) == 2
    assert main(["gen", "ktree", "--n", "5"]) == 2
    monkeypatch.setenv("TWSC_GUARD_N", "4")
    assert main(["oracle", "--instance", str(inst)]) == 2
    # a solution that breaks symmetry is an integrity failure
    sol = solve(tmp_path, inst, td)
    data = json.loads(sol.read_text())
    key = next(k for k in data if k not in ("", "objective", "mode") and "," not in k)
    data[key] = "0"
    sol.write_text(json.dumps(data))
    assert main(["round", "--instance", str(inst), "--decomposition", str(td), "--solution", str(sol),
                 "--derandomize"]) in (1,)
