import json

import numpy as np
import pytest

from cgsmooth import cli, smoothness
from cgsmooth.algorithm import feasible_c
from cgsmooth.game import CongestionGame, CostFunction, StrategyProfile, social_cost
from cgsmooth.lp import LPError
from cgsmooth.oracle import exact_poa
from cgsmooth.random_games import random_singleton_game
from cgsmooth.smoothness import SmoothnessCertificate
from cgsmooth.taxes import TaxTable

from conftest import constant_pair, linear_pair


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out.strip()
    return code, out


def _same_cert(a: SmoothnessCertificate, b: SmoothnessCertificate):
    assert a.lam == b.lam and a.objective == b.objective and a.scope == b.scope
    assert a.costs == b.costs and a.nu == b.nu and a.K == b.K and a.degree == b.degree
    assert all(np.array_equal(x, y) for x, y in zip(a.fprime, b.fprime))


def test_fmt():
    assert cli.fmt(1.0) == "1.000"
    assert cli.fmt(2.0120669) == "2.012"
    assert cli.fmt(1.6111) == "1.611"
    assert cli.fmt(641.3) == "641.3"
    assert cli.fmt(12345.0) == "1.234e+04"


def test_lambda_potential_d1(capsys, tmp_path):
    out = tmp_path / "cert.json"
    code, text = _run(capsys, "lambda", "--objective", "potential", "--degree", 1, "--out", out)
    assert code == 0 and text.startswith("1.61")
    cert = SmoothnessCertificate.from_json(json.loads(out.read_text()))
    _same_cert(cert, smoothness.monomial_certificate(1, "potential"))
    assert smoothness.verify_certificate(cert).valid


def test_lambda_socialcost_d1(capsys, tmp_path):
    code, text = _run(capsys, "lambda", "--objective", "socialcost", "--degree", 1)
    assert code == 0 and text == "2.012"


def test_lambda_constant_game(capsys, tmp_path):
    g = _write(tmp_path / "c.json", constant_pair().to_json())
    code, text = _run(capsys, "lambda", "--objective", "socialcost", "--game", g)
    assert code == 0 and text == "1.000"


def test_lambda_finite_n(capsys):
    code, text = _run(capsys, "lambda", "--objective", "socialcost", "--degree", 1, "--N", 10)
    assert code == 0 and float(text) == pytest.approx(2.0117716, abs=1e-3)


def test_lambda_bad_input(capsys, tmp_path):
    assert cli.main(["lambda", "--degree", "9"]) == cli.EXIT_INPUT
    assert cli.main(["lambda"]) == cli.EXIT_INPUT
    assert cli.main(["lambda", "--game", str(tmp_path / "missing.json")]) == cli.EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["lambda", "--game", str(bad)]) == cli.EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        cli.main(["lambda", "--objective", "nonsense"])
    assert info.value.code == cli.EXIT_INPUT
    with pytest.raises(SystemExit) as info:
        cli.main(["lambda", "--degree", "1", "--game", "x.json"])
    assert info.value.code == cli.EXIT_INPUT


def test_lp_failure_exit_code(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise LPError("solver gave up")
    monkeypatch.setattr(smoothness, "monomial_certificate", broken)
    assert cli.main(["lambda", "--degree", "1"]) == cli.EXIT_LP


@pytest.fixture(scope="module")
def phi1_cert_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cert") / "rho1.json"
    path.write_text(json.dumps(smoothness.monomial_certificate(1, "potential").to_json()))
    return str(path)


def test_solve_pne_start(capsys, tmp_path, phi1_cert_file):
    lin = CostFunction.monomial(1)
    g = _write(tmp_path / "g.json", CongestionGame.build([lin] * 2, [[[0]], [[1]]]).to_json())
    out = tmp_path / "report.json"
    code, text = _run(capsys, "solve", "--game", g, "--cert", phi1_cert_file, "--epsilon", 0.25,
                      "--c-override", 10, "--out", out)
    assert code == 0 and text == "1.000"
    report = json.loads(out.read_text())
    assert report["moves"] == 0 and report["certified_alpha"] == 1.0
    assert set(report["params"]) == {"q", "p", "c", "Delta", "theta_q", "z_hat"}
    assert all(round(v, 6) == v for v in report["params"].values())


def test_solve_exit_codes(capsys, tmp_path, phi1_cert_file):
    g = _write(tmp_path / "g.json", linear_pair().to_json())
    code, _ = _run(capsys, "solve", "--game", g, "--cert", phi1_cert_file, "--epsilon", 0.1,
                   "--c-override", 1)
    assert code == cli.EXIT_PARAMS
    six = CongestionGame.build([CostFunction.monomial(1)] * 2, [[[0], [1]]] * 6)
    g6 = _write(tmp_path / "g6.json", six.to_json())
    code, _ = _run(capsys, "solve", "--game", g6, "--cert", phi1_cert_file, "--epsilon", 0.25,
                   "--c-override", 20, "--move-cap", 1)
    assert code == cli.EXIT_CAP


def test_solve_random_batch(capsys, tmp_path, phi1_cert_file):
    rng = np.random.default_rng(99)
    for i in range(10):
        game = random_singleton_game(int(rng.integers(2, 20)), int(rng.integers(2, 6)), 1, rng)
        g = _write(tmp_path / f"g{i}.json", game.to_json())
        c = smoothness.monomial_certificate(1, "potential")
        cc = feasible_c(c.lam, 0.25, game.n_players)
        code, text = _run(capsys, "solve", "--game", g, "--cert", phi1_cert_file,
                          "--epsilon", 0.25, "--c-override", cc)
        assert code == 0 and float(text) <= c.lam * 1.25


def test_taxes_command(capsys, tmp_path):
    out = tmp_path / "taxes.json"
    code, text = _run(capsys, "taxes", "--degree", 1, "--out", out)
    assert code == 0 and text == "2.012"
    table = TaxTable.from_json(json.loads(out.read_text()))
    assert table.degree == 1 and TaxTable.from_json(table.to_json()) == table
    code, text = _run(capsys, "taxes", "--degree", 1, "--N", 2)
    assert code == 0 and float(text) >= 1


def test_lowerbound_command(capsys, tmp_path):
    inst, dual = tmp_path / "inst.json", tmp_path / "dual.json"
    code, text = _run(capsys, "lowerbound", "--degree", 1, "--out", inst, "--dual-out", dual)
    assert code == 0 and float(text) >= 2.012 - 0.03
    data = json.loads(inst.read_text())
    g = CongestionGame.from_json(data)
    s_star = StrategyProfile.from_json(g, data["equilibrium_profile"])
    s = StrategyProfile.from_json(g, data["optimal_profile"])
    assert social_cost(g, s_star) / social_cost(g, s) == pytest.approx(float(text), rel=1e-3)
    assert json.loads(dual.read_text())["N"] == 60


def test_verify_profile(capsys, tmp_path):
    g = _write(tmp_path / "g.json", linear_pair().to_json())
    split = _write(tmp_path / "split.json", {"choices": [0, 1]})
    stacked = _write(tmp_path / "stacked.json", {"choices": [0, 0]})
    assert _run(capsys, "verify", "--game", g, "--profile", split, "--alpha", 1) == (0, "1.000")
    assert _run(capsys, "verify", "--game", g, "--profile", stacked, "--alpha", 1) == (1, "2.000")
    assert _run(capsys, "verify", "--game", g, "--profile", stacked, "--alpha", 2)[0] == 0
    assert cli.main(["verify", "--game", g]) == cli.EXIT_INPUT


def test_verify_with_taxes_and_cert(capsys, tmp_path, phi1_cert_file):
    g = _write(tmp_path / "g.json", linear_pair().to_json())
    stacked = _write(tmp_path / "stacked.json", {"choices": [0, 0]})
    taxes = tmp_path / "t.json"
    assert cli.main(["taxes", "--degree", "1", "--out", str(taxes)]) == 0
    code, _ = _run(capsys, "verify", "--game", g, "--profile", stacked, "--taxes", taxes)
    assert code == 1
    code, _ = _run(capsys, "verify", "--game", g, "--profile", stacked, "--cert", phi1_cert_file)
    assert code == 1
    code, text = _run(capsys, "verify", "--cert", phi1_cert_file)
    assert code == 0 and float(text) >= 0
    assert cli.main(["verify", "--game", g, "--profile", stacked, "--cert", phi1_cert_file,
                     "--taxes", str(taxes)]) == cli.EXIT_INPUT


def test_oracle_command(capsys, tmp_path):
    game = linear_pair()
    g = _write(tmp_path / "g.json", game.to_json())
    out = tmp_path / "o.json"
    code, text = _run(capsys, "oracle", "--game", g, "--out", out)
    assert code == 0 and text == "1.000"
    report = json.loads(out.read_text())
    assert report["poa"] == exact_poa(game) == 1
    assert report["stretch"] == 1 and report["optimum"] == 2
    assert sorted(tuple(e["choices"]) for e in report["equilibria"]) == [(0, 1), (1, 0)]


def test_random_game_seeded(capsys, tmp_path):
    a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    for path, seed in ((a, 3), (b, 3), (c, 4)):
        assert cli.main(["random-game", "--players", "5", "--resources", "3", "--seed", str(seed),
                         "--out", str(path)]) == 0
    assert a.read_text() == b.read_text() != c.read_text()
    g = CongestionGame.from_json(json.loads(a.read_text()))
    assert g.n_players == 5 and CongestionGame.from_json(g.to_json()) == g
    capsys.readouterr()
    assert cli.main(["random-game", "--singleton", "--players", "3", "--seed", "1"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert all(len(s) == 1 for p in data["players"] for s in p["strategies"])
