"""CLI subcommands: configs, outputs, exit codes, idempotency."""
import json
import math

import numpy as np
import pytest

from sinkdiv.cli import main
from sinkdiv.measures import load_table


@pytest.fixture
def toy_files(tmp_path):
    mu = tmp_path / "mu.txt"
    nu = tmp_path / "nu.txt"
    mu.write_text("0.5,0\n0.5,1\n")
    nu.write_text("0.5,0.1\n0.5,0.9\n")
    return mu, nu


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


BOX_1D = {"lower": [0.0], "upper": [1.0]}
ABS_COST = {"variant": "AbsDistance"}


# ---------------------------------------------------------------------------
# compute
# ---------------------------------------------------------------------------

def test_compute_ot_exact(tmp_path, toy_files, capsys):
    mu, nu = toy_files
    cfg = write_config(tmp_path, {
        "kind": "ot_exact", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "cost": ABS_COST,
    })
    assert main(["compute", "--config", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kind"] == "ot_exact"
    assert out["value"] == pytest.approx(0.1, abs=1e-12)

def test_compute_s_eps_identical_inputs(tmp_path, toy_files, capsys):
    mu, _ = toy_files
    cfg = write_config(tmp_path, {
        "kind": "s_eps", "mu": str(mu), "nu": str(mu),
        "box": BOX_1D, "cost": ABS_COST, "epsilon": 0.5,
    })
    assert main(["compute", "--config", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["value"]) <= 1e-8

def test_compute_s_inf_vs_discrepancy_identity(tmp_path, toy_files, capsys):
    mu, nu = toy_files
    kernel = {"variant": "Gaussian", "params": {"c": 0.5}}
    cfg_d = write_config(tmp_path, {
        "kind": "discrepancy", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "kernel": kernel,
    }, "d.json")
    cfg_s = write_config(tmp_path, {
        "kind": "s_inf", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "kernel": kernel,
    }, "s.json")
    assert main(["compute", "--config", str(cfg_d)]) == 0
    d_value = json.loads(capsys.readouterr().out)["value"]
    assert main(["compute", "--config", str(cfg_s)]) == 0
    s_value = json.loads(capsys.readouterr().out)["value"]
    assert s_value == pytest.approx(0.5 * d_value**2, abs=1e-12)

def test_compute_writes_output_file(tmp_path, toy_files):
    mu, nu = toy_files
    out_path = tmp_path / "result.json"
    cfg = write_config(tmp_path, {
        "kind": "ot_eps", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "cost": ABS_COST, "epsilon": 1.0,
        "output": str(out_path),
    })
    assert main(["compute", "--config", str(cfg)]) == 0
    payload = json.loads(out_path.read_text())
    assert payload["diagnostics"]["kappa"] > 0
    assert payload["diagnostics"]["iterations"] >= 1

def test_compute_unknown_key_rejected(tmp_path, toy_files, capsys):
    mu, nu = toy_files
    cfg = write_config(tmp_path, {
        "kind": "ot_exact", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "cost": ABS_COST, "bogus": 1,
    })
    assert main(["compute", "--config", str(cfg)]) == 1
    assert "bogus" in capsys.readouterr().err

def test_compute_exit_two_when_not_converged(tmp_path, toy_files, capsys):
    mu, nu = toy_files
    rng = np.random.default_rng(0)
    big_mu = tmp_path / "big_mu.txt"
    big_nu = tmp_path / "big_nu.txt"
    for path in (big_mu, big_nu):
        pts = rng.random(20)
        w = rng.random(20) + 0.1
        path.write_text("\n".join(f"{wi},{xi}" for wi, xi in zip(w, pts)) + "\n")
    payload = {
        "kind": "ot_eps", "mu": str(big_mu), "nu": str(big_nu),
        "box": BOX_1D, "cost": ABS_COST, "epsilon": 1e-4, "max_iter": 10,
    }
    cfg = write_config(tmp_path, payload)
    assert main(["compute", "--config", str(cfg)]) == 2
    capsys.readouterr()
    assert main(["compute", "--config", str(cfg), "--allow-partial"]) == 0

def test_set_override(tmp_path, toy_files, capsys):
    mu, nu = toy_files
    cfg = write_config(tmp_path, {
        "kind": "ot_eps", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "cost": ABS_COST, "epsilon": 1.0,
    })
    assert main(["compute", "--config", str(cfg), "--set", "epsilon=1000.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["diagnostics"]["epsilon"] == 1000.0
    assert out["value"] == pytest.approx(0.5, abs=1e-3)

def test_missing_config_file(tmp_path, capsys):
    assert main(["compute", "--config", str(tmp_path / "nope.json")]) == 1


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_default_grid(tmp_path, toy_files):
    mu, nu = toy_files
    out_csv = tmp_path / "sweep.csv"
    cfg = write_config(tmp_path, {
        "mu": str(mu), "nu": str(nu), "box": BOX_1D, "cost": ABS_COST,
        "output": str(out_csv),
    })
    code = main(["sweep", "--config", str(cfg), "--allow-partial"])
    assert code == 0
    lines = out_csv.read_text().strip().splitlines()
    assert len(lines) == 27  # header + 25 finite + inf
    assert lines[0] == "epsilon,ot_eps,s_eps,phi_dist_inf,psi_dist_inf,iterations"
    assert lines[-1].startswith("inf,")
    ot_vals = [float(line.split(",")[1]) for line in lines[1:]]
    assert np.all(np.diff(ot_vals) >= -1e-8)

def test_sweep_endpoints_match_compute(tmp_path, toy_files, capsys):
    mu, nu = toy_files
    out_csv = tmp_path / "sweep.csv"
    cfg = write_config(tmp_path, {
        "mu": str(mu), "nu": str(nu), "box": BOX_1D, "cost": ABS_COST,
        "epsilons": [1e-4, 1.0, 1e3], "output": str(out_csv),
    })
    assert main(["sweep", "--config", str(cfg)]) == 0
    rows = out_csv.read_text().strip().splitlines()[1:]
    first_ot = float(rows[0].split(",")[1])
    cfg_exact = write_config(tmp_path, {
        "kind": "ot_exact", "mu": str(mu), "nu": str(nu),
        "box": BOX_1D, "cost": ABS_COST,
    }, "exact.json")
    assert main(["compute", "--config", str(cfg_exact)]) == 0
    exact = json.loads(capsys.readouterr().out)["value"]
    assert first_ot == pytest.approx(exact, abs=5e-3)


# ---------------------------------------------------------------------------
# dither
# ---------------------------------------------------------------------------

def test_dither_outputs(tmp_path, capsys):
    rng = np.random.default_rng(1)
    target = tmp_path / "target.txt"
    pts = rng.random((40, 2)) * 2 - 1
    w = rng.random(40) + 0.2
    target.write_text(
        "\n".join(f"{wi},{x},{y}" for wi, (x, y) in zip(w, pts)) + "\n"
    )
    out_pos = tmp_path / "positions.txt"
    out_trace = tmp_path / "trace.jsonl"
    cfg = write_config(tmp_path, {
        "target": str(target),
        "box": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0]},
        "cost": ABS_COST, "M": 4, "epsilon": "inf",
        "max_outer_iter": 20, "seed": 5,
        "output_positions": str(out_pos), "output_trace": str(out_trace),
    })
    assert main(["dither", "--config", str(cfg)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert "converged" in summary
    weights, positions = load_table(out_pos)
    assert np.allclose(weights, 0.25)
    assert positions.shape == (4, 2)
    trace = [json.loads(line) for line in out_trace.read_text().strip().splitlines()]
    energies = [t["energy"] for t in trace]
    assert all(b <= a + 1e-14 for a, b in zip(energies, energies[1:]))
    assert set(trace[0]) == {"iter", "energy", "grad_norm", "step"}

def test_dither_idempotent(tmp_path, capsys):
    rng = np.random.default_rng(2)
    target = tmp_path / "target.txt"
    pts = rng.random((30, 1))
    target.write_text("\n".join(f"1,{x}" for (x,) in pts) + "\n")
    outputs = []
    for run in range(2):
        out_pos = tmp_path / f"pos{run}.txt"
        out_trace = tmp_path / f"trace{run}.jsonl"
        cfg = write_config(tmp_path, {
            "target": str(target), "box": BOX_1D, "cost": ABS_COST,
            "M": 3, "epsilon": 1.0, "max_outer_iter": 5, "seed": 9,
            "inner_tol": 1e-8,
            "output_positions": str(out_pos), "output_trace": str(out_trace),
        }, f"cfg{run}.json")
        assert main(["dither", "--config", str(cfg)]) == 0
        capsys.readouterr()
        outputs.append(out_pos.read_text() + out_trace.read_text())
    assert outputs[0] == outputs[1]


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

def test_potentials_dumps(tmp_path, toy_files):
    mu, nu = toy_files
    paths = {key: tmp_path / f"{key}.txt" for key in ("phi", "psi", "diff", "witness")}
    cfg = write_config(tmp_path, {
        "mu": str(mu), "nu": str(nu), "box": BOX_1D, "cost": ABS_COST,
        "epsilon": 1024.0, "grid_points_per_axis": 32,
        "output_phi": str(paths["phi"]), "output_psi": str(paths["psi"]),
        "output_diff": str(paths["diff"]), "output_witness": str(paths["witness"]),
    })
    assert main(["potentials", "--config", str(cfg)]) == 0
    phi, mu_pts = load_table(paths["phi"])
    assert phi.shape == (2,)

    # the dumped potential satisfies the normalization pairing
    mu_weights = np.array([0.5, 0.5])
    cfg_inf = write_config(tmp_path, {
        "mu": str(mu), "nu": str(nu), "box": BOX_1D, "cost": ABS_COST,
        "epsilon": "inf", "grid_points_per_axis": 32,
        "output_phi": str(tmp_path / "phi_inf.txt"),
        "output_psi": str(tmp_path / "psi_inf.txt"),
        "output_diff": str(tmp_path / "diff_inf.txt"),
        "output_witness": str(tmp_path / "witness_inf.txt"),
    }, "inf.json")
    assert main(["potentials", "--config", str(cfg_inf)]) == 0
    phi_inf, _ = load_table(tmp_path / "phi_inf.txt")
    # 0.5 * OT_inf = 0.25 for this instance
    assert float(phi @ mu_weights) == pytest.approx(0.25, abs=1e-10)
    assert np.max(np.abs(phi - phi_inf)) < 1e-3

    # the dumped limit difference, normalized by the discrepancy, equals the
    # witness on the grid; hand double-sum: D^2 = -0.5 - 0.4 + 2 * 0.5 = 0.1
    diff, _ = load_table(tmp_path / "diff_inf.txt")
    witness, _ = load_table(tmp_path / "witness_inf.txt")
    d_value = math.sqrt(0.1)
    assert np.max(np.abs(diff / d_value - witness)) <= 1e-9
