import csv
import io
import json

import pytest

from robustpa import cli

TRAP = dict(p=0.5, theta_L=0.01, theta_H=0.8, m=0.5, k=1.0, gamma=0.1)
BASE = dict(p=0.5, theta_L=0.2, theta_H=0.8, m=0.5, k=0.1, gamma=1.0)
CAPACITY = dict(p=0.5, thetas=[0.2, 0.8], weights=[0.5, 0.5], lam=1.0)
STATIC = dict(
    actions=[dict(name="safe", models=[[0.5, 0.5]]), dict(name="innov", models=[[0.2, 0.8]], cost=0.3)],
    target="innov",
    lam=1.0,
)

SMOKE = {
    "static-solve": STATIC,
    "dynamic-solve": BASE,
    "capacity": CAPACITY,
    "trap-check": TRAP,
    "feedback": TRAP,
    "screen": dict(
        p=0.4, theta_L=0.2, theta_H=0.8, m=0.5, k=0.1, gamma=1.0,
        E=dict(x1=[0.0, 0.0], x2=[[0.0, 0.0], [0.0, 0.0]]),
        I=dict(x1=[-1.37, 3.63], x2=[[-1.37, -1.37], [-1.37, 2.63]]),
        gamma_lo=0.05, gamma_hi=2.0,
    ),
    "turnover": {**TRAP, "lambda1": 0.05},
    "simulate": {**BASE, "p_star_innov": 0.6, "T": 200, "seeds": [0, 1], "record_stride": 50},
    "speed-limit": {**BASE, "gamma": 0.05, "p_star_innov": 0.6, "T": 500, "seeds": [0, 1]},
    "bridge-check": {**BASE, "p_star_innov": 0.6, "contract": [-1.0, 1.0], "roots": [50, 200], "seeds": [0, 1], "horizon": 4, "depth": 2},
    "design-roadmap": dict(Q2=[[0.6, 0.4], [0.1, 0.9]], mu0=[0.5, 0.5], rho=0.5, lam=1.0, k=0.1, q1=[0.5, 0.5]),
    "milestones": dict(p=0.5, psi=0.4, theta_L=0.2, theta_H=0.8, eps_L=0.05, eps_H=0.05, mu=[0.0, 1.0], lam=1.0),
    "shirking": dict(p0=0.3, p=0.5, thetas=[0.2, 0.8], k1=0.2, k=0.5, mu=[0.5, 0.5], lam=1.0),
}


def run(tmp_path, command, config, *flags):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return cli.main([command, "--config", str(path), *flags])


def test_every_command_has_a_smoke_config():
    assert set(SMOKE) == set(cli.COMMANDS)


@pytest.mark.parametrize("command", sorted(SMOKE))
def test_command_runs_and_round_trips(command):
    code, envelope, _ = cli.execute(command, SMOKE[command], seed=0)
    assert code in (cli.EXIT_OK, cli.EXIT_INFEASIBLE)
    assert envelope["command"] == command and len(envelope["config_digest"]) == 64
    text = json.dumps(envelope, sort_keys=True)
    assert json.loads(text) == envelope


def test_trap_check_envelope(tmp_path, capsys):
    assert run(tmp_path, "trap-check", TRAP) == 0
    result = json.loads(capsys.readouterr().out)["result"]
    assert result["trap"] is True
    assert result["lambda_star"] == pytest.approx(0.916291, abs=1e-6)
    assert result["lambda2_success"] == pytest.approx(2.231436, abs=1e-6)


def test_missing_field_is_named(tmp_path, capsys):
    config = {k: v for k, v in TRAP.items() if k != "theta_H"}
    assert run(tmp_path, "trap-check", config) == 1
    assert "theta_H" in capsys.readouterr().err


def test_unknown_field_rejected(tmp_path, capsys):
    assert run(tmp_path, "trap-check", {**TRAP, "colour": 1}) == 1
    assert "colour" in capsys.readouterr().err


def test_domain_error_exits_one(tmp_path, capsys):
    assert run(tmp_path, "trap-check", {**TRAP, "theta_L": 0.7}) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_expected_utility_capacity_encodes_infinity():
    _, envelope, _ = cli.execute("capacity", dict(p=0.5, thetas=[0.7], weights=[1.0], lam="zero-limit"))
    assert envelope["result"]["capacity"] == "inf"
    assert envelope["result"]["lambda"] == "zero-limit"
    _, envelope, _ = cli.execute("capacity", {**CAPACITY, "weights": [0.4, 0.6], "lam": 0.0})
    assert envelope["result"]["capacity"] == "inf"


def test_infeasible_static_exits_two(tmp_path, capsys):
    config = {**STATIC, "actions": [STATIC["actions"][0], {**STATIC["actions"][1], "cost": 1.5}]}
    assert run(tmp_path, "static-solve", config) == 2
    assert json.loads(capsys.readouterr().out)["result"]["infeasible"] is True


def test_payload_deterministic_given_seed():
    config = SMOKE["simulate"]
    a = cli.execute("simulate", config, seed=3)[1]
    b = cli.execute("simulate", config, seed=3)[1]
    assert cli.canonical(a["result"]) == cli.canonical(b["result"])
    assert a["config_digest"] == b["config_digest"]
    assert cli.execute("simulate", config, seed=4)[1]["config_digest"] != a["config_digest"]


def test_digest_ignores_field_order_and_defaults():
    reordered = dict(reversed(list(TRAP.items())))
    explicit = {**TRAP, "A": 1.0, "delta": 1.0}
    digests = {cli.execute("trap-check", c, seed=0)[1]["config_digest"] for c in (TRAP, reordered, explicit)}
    assert len(digests) == 1


def test_grid_sweep_writes_csv(tmp_path, capsys):
    out = tmp_path / "out"
    assert run(tmp_path, "capacity", CAPACITY, "--grid", "lam=0.5:2:4", "--format", "csv", "--out", str(out)) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [float(r["lam"]) for r in rows] == [0.5, 1.0, 1.5, 2.0]
    caps = [float(r["capacity"]) for r in rows]
    assert caps == sorted(caps, reverse=True)
    assert (out / "capacity.csv").read_text().splitlines()[0].startswith("lam,")
    assert json.loads((out / "capacity.json").read_text())["result"]["grid_field"] == "lam"


def test_grid_marks_infeasible_rows():
    code, envelope, rows = cli.execute("static-solve", STATIC, grid="lam=0.5,4.0")
    assert code == 0
    assert [r["status"] for r in rows] == ["ok", "infeasible"]


@pytest.mark.parametrize("spec", ["lam", "lam=1:2", "colour=0,1"])
def test_bad_grid_specs(tmp_path, spec):
    assert run(tmp_path, "capacity", CAPACITY, "--grid", spec) == 1


def test_csv_without_table_is_an_error(tmp_path):
    assert run(tmp_path, "trap-check", TRAP, "--format", "csv") == 1


@pytest.mark.parametrize("value,expected", [(float("inf"), "inf"), (float("-inf"), "-inf"), (1.5, 1.5), ({1, 0}, [0, 1])])
def test_extended_real_encoding(value, expected):
    assert cli.to_jsonable(value) == expected


def test_parse_grid_forms():
    name, values = cli.parse_grid("k=0:1:3")
    assert name == "k" and values.tolist() == [0.0, 0.5, 1.0]
    assert cli.parse_grid("k=0.1,0.2")[1].tolist() == [0.1, 0.2]
