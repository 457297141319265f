"""Command-line interface: subcommands, config plumbing, and exit codes."""

import json

import pytest

from shuffle_sgd.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -------------------------------------------------------------- exit codes


def test_unknown_flag_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--definitely-not-a-flag"])
    assert exc.value.code == 1


def test_unknown_subcommand_exits_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_unknown_config_key_exits_1(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 2, "bogus": 1}))
    code, _, err = run_cli(capsys, "run", "--config", str(cfg))
    assert code == 1
    assert "bogus" in err


def test_config_must_be_json_object(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2, 3]")
    code, _, err = run_cli(capsys, "run", "--config", str(cfg))
    assert code == 1


def test_divergent_run_exits_2(capsys):
    code, _, err = run_cli(
        capsys,
        "run",
        "--family",
        "quadratic",
        "--n",
        "4",
        "--k",
        "64",
        "--regime",
        "1000000lnT/T",
    )
    assert code == 2
    assert "diverged" in err


# --------------------------------------------------------------------- run


def test_run_hand_trace_output(capsys):
    code, out, _ = run_cli(
        capsys, "run", "--family", "f2", "--n", "2", "--k", "1", "--alpha", "0.1"
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0].startswith("alpha 0.1")
    assert lines[1] == "final_sq_error 2.5000000000000045e-05"


def test_run_per_epoch_lines(capsys):
    code, out, _ = run_cli(
        capsys,
        "run",
        "--family",
        "f2",
        "--n",
        "2",
        "--k",
        "2",
        "--alpha",
        "0.1",
        "--per-epoch",
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "epoch,sq_error"
    assert lines[1] == "0,0"
    assert len(lines) == 1 + 3 + 2  # header, epochs 0..2, alpha, final


def test_run_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "f2", "n": 2, "k": 1, "alpha": 0.1}))
    base_code, base_out, _ = run_cli(capsys, "run", "--config", str(cfg))
    over_code, over_out, _ = run_cli(
        capsys, "run", "--config", str(cfg), "--alpha", "0.05"
    )
    assert base_code == over_code == 0
    assert "2.5000000000000045e-05" in base_out
    assert "2.5000000000000045e-05" not in over_out


def test_seed_flag_beats_env_beats_default(capsys, monkeypatch):
    argv = ["run", "--family", "piecewise", "--n", "4", "--k", "1", "--alpha", "0.1"]
    _, default_out, _ = run_cli(capsys, *argv)
    monkeypatch.setenv("SHUFFLE_SGD_SEED", "7")
    _, env_out, _ = run_cli(capsys, *argv)
    _, flag_out, _ = run_cli(capsys, *argv, "--seed", "0")
    assert env_out != default_out  # env seed changes the permutation draws
    assert flag_out == default_out  # explicit flag wins over the env var


def test_bad_env_seed_exits_1(capsys, monkeypatch):
    monkeypatch.setenv("SHUFFLE_SGD_SEED", "not-an-int")
    code, _, err = run_cli(
        capsys, "run", "--family", "f2", "--n", "2", "--k", "1", "--alpha", "0.1"
    )
    assert code == 1
    assert "SHUFFLE_SGD_SEED" in err


# ------------------------------------------------------------------- sweep


def test_sweep_dry_run_plans_without_output(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(
        capsys,
        "sweep",
        "--sweep-var",
        "K",
        "--grid",
        "4,8",
        "--fixed",
        "8",
        "--repeats",
        "5",
        "--out",
        str(out_dir),
        "--dry-run",
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert len(lines) == 2
    assert lines[0].startswith("plan: K=4 ")
    assert "alpha=" in lines[0] and "repeats=5" in lines[0]
    assert not (out_dir / "sweep_K.csv").exists()


def test_sweep_writes_csv_and_svg_and_fits(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(
        capsys,
        "sweep",
        "--sweep-var",
        "K",
        "--grid",
        "8,16,32",
        "--fixed",
        "8",
        "--repeats",
        "20",
        "--regime",
        "4lnT/T",
        "--out",
        str(out_dir),
    )
    assert code == 0
    assert "slope " in out and "r_squared " in out
    assert (out_dir / "sweep_K.csv").exists()
    assert (out_dir / "sweep_K.svg").exists()


def test_sweep_from_csv_reproduces_fit(tmp_path, capsys):
    out_dir = tmp_path / "out"
    _, live_out, _ = run_cli(
        capsys,
        "sweep",
        "--sweep-var",
        "K",
        "--grid",
        "4,8,16",
        "--fixed",
        "8",
        "--repeats",
        "10",
        "--out",
        str(out_dir),
    )
    code, replay_out, _ = run_cli(
        capsys, "sweep", "--from-csv", str(out_dir / "sweep_K.csv")
    )
    assert code == 0
    live_fit = [l for l in live_out.split("\n") if l.startswith(("slope", "r_squared"))]
    replay_fit = [
        l for l in replay_out.split("\n") if l.startswith(("slope", "r_squared"))
    ]
    assert live_fit == replay_fit


def test_sweep_from_exact_power_law_csv(tmp_path, capsys):
    """A synthetic CSV with mean = n / T^2 must fit slope -2 exactly."""
    rows = ["sweep_var,n,K,T,alpha,repeats,mean_sq_error,stderr,min,max"]
    n = 8
    for k in (4, 8, 16, 32):
        t = n * k
        mean = n / t**2
        rows.append(f"K,{n},{k},{t},0.01,4,{mean!r},0,{mean!r},{mean!r}")
    path = tmp_path / "power.csv"
    path.write_text("\n".join(rows) + "\n", encoding="ascii")
    code, out, _ = run_cli(capsys, "sweep", "--from-csv", str(path))
    assert code == 0
    slope = float(out.split("\n")[0].split()[1])
    assert slope == pytest.approx(-2.0, abs=1e-12)


# --------------------------------------------------- permstats/bound/couple


def test_permstats_table_mode(capsys):
    code, out, _ = run_cli(capsys, "permstats", "--n", "4")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "i,k,probability,e_abs,second_moment"
    assert "2,0,2/3,2/3,4/3" in lines


def test_permstats_check_mode(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(
        capsys, "permstats", "--n-max", "16", "--out", str(out_dir)
    )
    assert code == 0
    assert "PASS" in out
    assert (out_dir / "permstats.csv").exists()


def test_bound_report_and_csv(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(
        capsys,
        "bound",
        "--which",
        "upper",
        "--n",
        "4",
        "--k",
        "4096",
        "--out",
        str(out_dir),
    )
    assert code == 0
    assert "upper_bound_quadratic" in out
    assert "0.028944685641755" in out
    assert (out_dir / "bound.csv").exists()


def test_bound_window_mode(capsys):
    code, out, _ = run_cli(
        capsys, "bound", "--which", "window", "--n", "256", "--k", "256", "--L", "1"
    )
    assert code == 0
    assert out.startswith("alpha_window [")
    assert out.strip().endswith("empty")


def test_couple_swap_zero_alpha(capsys):
    code, out, _ = run_cli(
        capsys, "couple", "--check", "swap", "--alpha", "0", "--trials", "30", "--n", "4"
    )
    assert code == 0
    assert "swap_distance: PASS" in out
    assert "max gap 0 bound 0" in out


def test_couple_all_checks_smoke(tmp_path, capsys):
    out_dir = tmp_path / "out"
    code, out, _ = run_cli(
        capsys,
        "couple",
        "--check",
        "all",
        "--n",
        "4",
        "--k",
        "2",
        "--trials",
        "50",
        "--repeats",
        "80",
        "--out",
        str(out_dir),
    )
    assert code == 0
    for name in ("swap_distance", "gradient_gap", "epoch_drift", "posexp"):
        assert f"{name}: PASS" in out
    csv_text = (out_dir / "coupling.csv").read_text(encoding="ascii")
    assert csv_text.startswith("check_name,i,j,estimate,stderr,bound,pass\n")
