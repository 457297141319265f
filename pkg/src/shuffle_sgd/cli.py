"""Command line: runs, sweeps, exact permutation statistics, coupling
checks, bound oracles, and a self-verifying determinism suite.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure
(divergence, a failed check, or a determinism diff).

Options may come from a JSON object file (--config); explicit flags
override file values and unknown file keys are rejected.  The seed
resolves as --seed, then the config file, then the SHUFFLE_SGD_SEED
environment variable, then 0.  All numerics print with 17 significant
digits so values round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

from . import bounds, coupling, harness, permstats
from .engine import (
    DivergenceError,
    RecordMode,
    RunConfig,
    StepSizeRegime,
    alpha_of,
    final_sq_errors,
    parse_regime,
    run_batch,
    run_sgdo,
)
from .objectives import PiecewiseFamily, family_from_spec, make_f2, make_quadratic
from .permutation import derive_stream, splitmix64_sequence

ENV_SEED = "SHUFFLE_SGD_SEED"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


# -- config handling -----------------------------------------------------------


def _load_config(path: str, allowed: set[str]) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {unknown}")
    return data


def _gather(args, defaults: dict) -> dict:
    """File values override defaults; explicit flags override the file."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        cfg.update(_load_config(args.config, set(defaults)))
    for key in defaults:
        v = getattr(args, key, None)
        if v is None or (isinstance(v, bool) and not v):
            continue
        cfg[key] = v
    return cfg


def _seed_of(cfg: dict) -> int:
    if cfg.get("seed") is not None:
        return int(cfg["seed"])
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValueError(f"{ENV_SEED} must be an integer, got {env!r}") from exc
    return 0


def _family_spec(kind_or_spec, n=None, l_left=None, g_lin=None) -> dict:
    spec = dict(kind_or_spec) if isinstance(kind_or_spec, dict) else {"kind": kind_or_spec}
    if n is not None:
        spec["n"] = n
    if l_left is not None:
        spec["L"] = l_left
    if g_lin is not None:
        spec["G"] = g_lin
    return spec


def _parse_grid(value) -> tuple[int, ...]:
    parts = [s for s in value.split(",") if s] if isinstance(value, str) else value
    grid = []
    for x in parts:
        if float(x) != int(x):
            raise ValueError(f"grid values must be integers, got {x!r}")
        grid.append(int(x))
    return tuple(grid)


def _out_dir(cfg: dict, default: str = ".") -> Path:
    out = Path(cfg.get("out") or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _workers_of(cfg: dict) -> int:
    if cfg.get("workers") is not None:
        w = int(cfg["workers"])
        if w < 1:
            raise ValueError(f"workers must be >= 1, got {w}")
        return w
    return os.cpu_count() or 1


_COMMON_KEYS = {"seed": None, "out": None, "workers": None}


# -- run -----------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _gather(
        args,
        {
            "family": "piecewise", "n": 16, "k": 4, "regime": None, "alpha": None,
            "L": None, "G": None, "per_epoch": False, **_COMMON_KEYS,
        },
    )
    seed = _seed_of(cfg)
    family = family_from_spec(_family_spec(cfg["family"], cfg["n"], cfg["L"], cfg["G"]))
    regime = parse_regime(cfg["regime"]) if cfg["regime"] is not None else None
    alpha = None if cfg["alpha"] is None else float(cfg["alpha"])
    if regime is None and alpha is None and int(cfg["k"]) > 0:
        regime = StepSizeRegime.recip_t()
    run_cfg = RunConfig(
        family=family,
        k_epochs=int(cfg["k"]),
        regime=regime,
        alpha=alpha,
        record_mode=RecordMode.PER_EPOCH if cfg["per_epoch"] else RecordMode.FINAL_ONLY,
        base_seed=seed,
    )
    if args.dry_run:
        print(
            f"plan: run family={family!r} K={run_cfg.k_epochs} "
            f"alpha={_fmt(run_cfg.resolve_alpha())} seed={seed}"
        )
        return 0
    traj = run_sgdo(run_cfg)
    if cfg["per_epoch"]:
        x_star = family.minimizer()
        print("epoch,sq_error")
        for j, i, x in traj.records:
            if (j, i) == (0, 0) or i == family.n:
                err = float(((x - x_star) ** 2).sum())
                print(f"{j},{_fmt(err)}")
    print(f"alpha {_fmt(traj.alpha)}")
    print(f"final_sq_error {_fmt(traj.final_sq_error)}")
    return 0


# -- sweep ---------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = _gather(
        args,
        {
            "family": "piecewise", "sweep_var": "K", "grid": None, "fixed": None,
            "regime": "4lnT/T", "repeats": harness.DEFAULT_REPEATS,
            "L": 4.0, "G": 1.0, "from_csv": None, **_COMMON_KEYS,
        },
    )
    if cfg["from_csv"]:
        var, points = harness.read_csv(cfg["from_csv"])
        fit = harness.fit_rate([(p.sweep_value[var], p.mean_sq_error) for p in points])
        print(f"slope {_fmt(fit.slope)}")
        print(f"r_squared {_fmt(fit.r_squared)}")
        return 0
    seed = _seed_of(cfg)
    var = str(cfg["sweep_var"]).upper()
    if var == "K":
        grid = _parse_grid(cfg["grid"]) if cfg["grid"] is not None else harness.DEFAULT_K_GRID
        fixed = int(cfg["fixed"]) if cfg["fixed"] is not None else harness.DEFAULT_FIXED_N
    else:
        grid = _parse_grid(cfg["grid"]) if cfg["grid"] is not None else harness.DEFAULT_N_GRID
        fixed = int(cfg["fixed"]) if cfg["fixed"] is not None else harness.DEFAULT_FIXED_K
    sweep_cfg = harness.SweepConfig(
        family=_family_spec(cfg["family"], None, cfg["L"], cfg["G"]),
        sweep_var=var,
        grid=grid,
        fixed=fixed,
        regime=parse_regime(cfg["regime"]),
        repeats=int(cfg["repeats"]),
        base_seed=seed,
    )
    if args.dry_run:
        for value in grid:
            n, k = sweep_cfg.point_nk(value)
            mu = family_from_spec(sweep_cfg.family, n=n).constants().mu
            alpha = 0.0 if k == 0 else alpha_of(sweep_cfg.regime, n, k, mu)
            print(
                f"plan: {var}={value} n={n} K={k} T={n * k} "
                f"alpha={_fmt(alpha)} repeats={sweep_cfg.repeats}"
            )
        return 0
    result = harness.run_sweep(sweep_cfg, workers=_workers_of(cfg))
    out = _out_dir(cfg)
    csv_path = harness.emit_csv(result, out / f"sweep_{var}.csv")
    svg_path = harness.emit_svg(result, (), out / f"sweep_{var}.svg")
    fit = harness.fit_rate(list(zip(result.values(), result.mean_errors())))
    print(f"slope {_fmt(fit.slope)}")
    print(f"r_squared {_fmt(fit.r_squared)}")
    print(f"wrote {csv_path}")
    print(f"wrote {svg_path}")
    return 0


# -- permstats -----------------------------------------------------------------


def cmd_permstats(args) -> int:
    cfg = _gather(args, {"n": None, "check": False, "n_max": 256, **_COMMON_KEYS})
    if cfg["n"] is not None and not cfg["check"]:
        n = int(cfg["n"])
        lines = ["i,k,probability,e_abs,second_moment"]
        for i in range(1, n + 1):
            dist = permstats.exact_distribution(n, i)
            e_abs = dist.expected_abs()
            second = dist.second_moment()
            for k in sorted(dist.pmf):
                lines.append(f"{i},{k},{dist.pmf[k]},{e_abs},{second}")
        text = "\n".join(lines) + "\n"
        sys.stdout.write(text)
        if cfg["out"]:
            path = _out_dir(cfg) / "permstats.csv"
            path.write_text(text, encoding="ascii")
            print(f"wrote {path}")
        return 0
    n_max = int(cfg["n_max"])
    if args.dry_run:
        print(f"plan: lemma13 exact checks for n multiple of 4 in [8, {n_max}]")
        return 0
    report = permstats.check_lemma13(n_max)
    for line in report.table_lines():
        print(line)
    print(
        f"{'PASS' if report.passed else 'FAIL'} lemma13 n_max={n_max} "
        f"rows={len(report.rows)} violations={len(report.violations)}"
    )
    if cfg["out"]:
        path = _out_dir(cfg) / "permstats.csv"
        path.write_text(permstats.rows_to_csv(report.rows), encoding="ascii")
        print(f"wrote {path}")
    return 0 if report.passed else 2


# -- couple --------------------------------------------------------------------


def _couple_reports(family, cfg: dict, seed: int) -> list:
    checks = cfg["check"]
    alpha = float(cfg["alpha"])
    reports = []
    if checks in ("swap", "all"):
        stream = derive_stream(seed, 0, 0)
        reports.append(
            coupling.swap_distance_check(family, family.n, alpha, int(cfg["trials"]), stream)
        )
    if checks in ("gap", "all"):
        stream = derive_stream(seed, 1, 0)
        reports.append(
            coupling.gradient_gap_check(
                family, family.n, alpha, int(cfg["warmup"]), int(cfg["repeats"]), stream
            )
        )
    if checks in ("drift", "all"):
        run_cfg = RunConfig(
            family=family, k_epochs=int(cfg["k"]), alpha=alpha, base_seed=seed, sweep_index=2
        )
        reports.append(coupling.epoch_drift_check(family, run_cfg, int(cfg["repeats"])))
    if checks in ("posexp", "all"):
        skippable = checks == "all"
        if skippable and not isinstance(family, PiecewiseFamily):
            print("skipped posexp (needs a 1-D piecewise family)")
        elif skippable and alpha > 1.0 / family.l_left:
            print(f"skipped posexp (alpha > 1/L = {_fmt(1.0 / family.l_left)})")
        else:
            run_cfg = RunConfig(
                family=family, k_epochs=int(cfg["k"]), alpha=alpha, base_seed=seed, sweep_index=3
            )
            reports.append(coupling.posexp_check(family, run_cfg, int(cfg["repeats"])))
    return reports


def cmd_couple(args) -> int:
    cfg = _gather(
        args,
        {
            "check": "all", "family": "piecewise", "n": 16, "L": 4.0, "G": 1.0,
            "alpha": 0.01, "trials": 2000, "repeats": 2000, "warmup": 1, "k": 4,
            **_COMMON_KEYS,
        },
    )
    if cfg["check"] not in ("swap", "gap", "drift", "posexp", "all"):
        raise ValueError(f"unknown check {cfg['check']!r}")
    seed = _seed_of(cfg)
    family = family_from_spec(_family_spec(cfg["family"], cfg["n"], cfg["L"], cfg["G"]))
    if args.dry_run:
        print(
            f"plan: couple check={cfg['check']} family={family!r} "
            f"alpha={_fmt(float(cfg['alpha']))} trials={cfg['trials']} "
            f"repeats={cfg['repeats']} seed={seed}"
        )
        return 0
    reports = _couple_reports(family, cfg, seed)
    all_rows = []
    for report in reports:
        print(report.summary())
        if report.name == "swap_distance":
            worst = max(r.estimate for r in report.rows)
            print(f"swap_distance max gap {_fmt(worst)} bound {_fmt(report.rows[0].bound)}")
        for note in report.notes:
            print(f"  {note}")
        all_rows.extend(report.rows)
    if cfg["out"]:
        path = _out_dir(cfg) / "coupling.csv"
        path.write_text(coupling.rows_to_csv(all_rows), encoding="ascii")
        print(f"wrote {path}")
    return 0 if all(r.passed for r in reports) else 2


# -- bound ---------------------------------------------------------------------


def _bound_csv(report: bounds.BoundReport) -> str:
    lines = ["bound_name,bound_value,applicable,precondition,required,actual,satisfied"]
    for p in report.preconditions:
        lines.append(
            f"{report.name},{_fmt(report.bound_value)},{int(report.applicable)},"
            f"{p.name},{p.required},{p.actual},{int(p.satisfied)}"
        )
    return "\n".join(lines) + "\n"


def cmd_bound(args) -> int:
    cfg = _gather(
        args,
        {
            "which": "upper", "n": 256, "k": 256, "mu": 1.0, "L": 1.0, "G": 1.0,
            "D": 1.0, "l": 2.0, **_COMMON_KEYS,
        },
    )
    n, k = int(cfg["n"]), int(cfg["k"])
    if cfg["which"] == "upper":
        report = bounds.upper_bound_quadratic(
            n, k, float(cfg["mu"]), float(cfg["L"]), float(cfg["G"]),
            float(cfg["D"]), float(cfg["l"]),
        )
    elif cfg["which"] == "lower":
        report = bounds.lower_bound_general(n, k, float(cfg["G"]), float(cfg["L"]))
    elif cfg["which"] == "window":
        lo, hi = bounds.alpha_window(n, k, float(cfg["L"]))
        state = "empty" if lo > hi else "nonempty"
        print(f"alpha_window [{_fmt(lo)}, {_fmt(hi)}] {state}")
        return 0
    else:
        raise ValueError(f"--which must be upper, lower, or window, got {cfg['which']!r}")
    for line in report.lines():
        print(line)
    if cfg["out"]:
        path = _out_dir(cfg) / "bound.csv"
        path.write_text(_bound_csv(report), encoding="ascii")
        print(f"wrote {path}")
    return 0


# -- verify --------------------------------------------------------------------

# Scales for the self-check suite.  The full scale asserts the slope bands
# at the sizes the sweeps are designed for; the fast scale shrinks every
# Monte Carlo budget and widens the bands enough to stay reliable while
# still catching gross breakage.
_SUITES = {
    "fast": {
        "ksweep": {"fixed": 64, "grid": (16, 32, 64), "repeats": 60, "band": (-2.8, -1.2)},
        "nsweep": {"fixed": 64, "grid": (16, 32, 64), "repeats": 60, "band": (-2.0, -0.2)},
        "extra_regimes": ("1/T", "2lnT/T", "8lnT/T"),
        "lemma13_n": 64,
        "bruteforce_n": 8,
        "oracle": {"n": 4, "k": 2048, "lanes": 20},
        "swap": {"ns": (16,), "alphas": (1e-2,), "trials": 1000},
        "gap": {"n": 16, "alpha": 0.01, "warmup": 1, "repeats": 4000},
        "drift": {"n": 32, "alpha": 1e-3, "k": 1, "repeats": 2000},
        "posexp": {"n": 16, "k": 4, "alphas": (1e-2,), "repeats": 2000},
    },
    "full": {
        "ksweep": {"fixed": 256, "grid": (32, 64, 128, 256), "repeats": 400, "band": (-2.3, -1.7)},
        "nsweep": {"fixed": 256, "grid": (32, 64, 128, 256), "repeats": 400, "band": (-1.5, -0.6)},
        "extra_regimes": ("1/T", "2lnT/T", "8lnT/T"),
        "lemma13_n": 256,
        "bruteforce_n": 12,
        "oracle": {"n": 4, "k": 4096, "lanes": 100},
        "swap": {"ns": (16, 64), "alphas": (1e-3, 1e-2), "trials": 12500},
        "gap": {"n": 64, "alpha": 0.01, "warmup": 1, "repeats": 100000},
        "drift": {"n": 128, "alpha": 1e-3, "k": 1, "repeats": 10000},
        "posexp": {"n": 64, "k": 8, "alphas": (1e-3, 0.25), "repeats": 10000},
    },
}

_PIECEWISE_SPEC = {"kind": "piecewise", "L": 4.0, "G": 1.0}


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "-", label)


def _check_line(ok: bool, name: str, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} {name} {detail}"


def _verify_sweeps(scale: dict, out: Path, seed: int, workers: int, lines: list[str]) -> None:
    import math

    band_lo, band_hi = scale["ksweep"]["band"]

    def run_one(var: str, params: dict, regime_text: str, assert_band: bool):
        regime = parse_regime(regime_text)
        cfg = harness.SweepConfig(
            family=_PIECEWISE_SPEC,
            sweep_var=var,
            grid=params["grid"],
            fixed=params["fixed"],
            regime=regime,
            repeats=params["repeats"],
            base_seed=seed,
        )
        result = harness.run_sweep(cfg, workers=workers)
        slug = _slug(regime.label)
        harness.emit_csv(result, out / f"sweep_{var}_{slug}.csv")
        harness.emit_svg(result, (), out / f"sweep_{var}_{slug}.svg")
        fit = harness.fit_rate(list(zip(result.values(), result.mean_errors())))
        return result, fit, assert_band

    # Epoch scaling under the default regime, then the alternate regimes.
    k_params = scale["ksweep"]
    for regime_text in ("4lnT/T",) + scale["extra_regimes"]:
        _, fit, _ = run_one("K", k_params, regime_text, True)
        ok = band_lo <= fit.slope <= band_hi
        lines.append(
            _check_line(
                ok,
                f"ksweep_{_slug(regime_text)}",
                f"slope={_fmt(fit.slope)} band=[{band_lo:g}, {band_hi:g}] r2={fit.r_squared:.4f}",
            )
        )
    # The 1/n regime has a K-independent step size: report, do not assert.
    _, fit_n, _ = run_one("K", k_params, "1/n", False)
    lines.append(f"INFO ksweep_1-n slope={_fmt(fit_n.slope)} (shape only, not asserted)")

    # Component scaling plus the normalized-rate spread that separates
    # error ~ n/T^2 from error ~ n^2/T^3.
    n_params = scale["nsweep"]
    result, fit, _ = run_one("N", n_params, "4lnT/T", True)
    lo, hi = n_params["band"]
    ok = lo <= fit.slope <= hi
    lines.append(
        _check_line(ok, "nsweep_4lnT-T", f"slope={_fmt(fit.slope)} band=[{lo:g}, {hi:g}]")
    )
    normalized = [p.mean_sq_error * p.t_total**2 / p.n for p in result.points]
    spread = max(normalized) / min(normalized)
    t_vals = [p.t_total for p in result.points]
    allowed = (math.log(max(t_vals)) / math.log(min(t_vals))) ** 2 * 4.0
    ok = spread <= allowed
    lines.append(
        _check_line(
            ok, "nsweep_normalized", f"spread={_fmt(spread)} allowed={_fmt(allowed)}"
        )
    )


def _verify_permstats(scale: dict, out: Path, lines: list[str]) -> None:
    report = permstats.check_lemma13(scale["lemma13_n"])
    (out / "permstats.csv").write_text(permstats.rows_to_csv(report.rows), encoding="ascii")
    # Moment bounds must hold on every row; only small-n tails may fail,
    # and those are informational (not asserted) by construction.
    ok = report.passed and report.moment_bounds_hold()
    lines.append(
        _check_line(
            ok,
            "lemma13",
            f"n_max={scale['lemma13_n']} rows={len(report.rows)} "
            f"violations={len(report.violations)}",
        )
    )
    ok = True
    for n in range(2, scale["bruteforce_n"] + 1, 2):
        for i in range(1, n + 1):
            if permstats.exact_distribution(n, i).pmf != permstats.enumerate_bruteforce(n, i).pmf:
                ok = False
    lines.append(_check_line(ok, "pmf_bruteforce", f"n<= {scale['bruteforce_n']} all i"))


def _verify_oracle(scale: dict, out: Path, seed: int, lines: list[str]) -> None:
    params = scale["oracle"]
    n, k, lanes = params["n"], params["k"], params["lanes"]
    family = make_quadratic(n, 1.0, g_bound=1.0, d_bound=1.0, seed=seed)
    report = bounds.upper_bound_quadratic(n, k, 1.0, 1.0, 1.0, 1.0, 2.0)
    alpha = alpha_of(StepSizeRegime.theorem1(2.0), n, k, 1.0)
    finals = run_batch(family, k, alpha, seed, 0, range(lanes))
    errs = final_sq_errors(family, finals)
    rows = ["lane,final_sq_error,bound,pass"]
    ok_all = report.applicable
    for lane, err in enumerate(errs):
        ok = err <= report.bound_value
        ok_all = ok_all and ok
        rows.append(f"{lane},{_fmt(float(err))},{_fmt(report.bound_value)},{int(ok)}")
    (out / "oracle.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    lines.append(
        _check_line(
            ok_all,
            "upper_bound_oracle",
            f"n={n} K={k} lanes={lanes} max_err={_fmt(float(errs.max()))} "
            f"bound={_fmt(report.bound_value)} applicable={report.applicable}",
        )
    )


def _verify_coupling(scale: dict, out: Path, seed: int, lines: list[str]) -> None:
    all_rows = []
    sweep_index = 10
    for label, build in (("pw4", lambda n: PiecewiseFamily(n, 4.0, 1.0)), ("f2", make_f2)):
        for n in scale["swap"]["ns"]:
            for alpha in scale["swap"]["alphas"]:
                stream = derive_stream(seed, sweep_index, 0)
                sweep_index += 1
                report = coupling.swap_distance_check(
                    build(n), n, alpha, scale["swap"]["trials"], stream
                )
                all_rows.extend(report.rows)
                worst = max(r.estimate for r in report.rows)
                lines.append(
                    _check_line(
                        report.passed,
                        f"swap_{label}_n{n}_a{alpha:g}",
                        f"max_gap={_fmt(worst)} bound={_fmt(report.rows[0].bound)}",
                    )
                )
    gap = scale["gap"]
    family = PiecewiseFamily(gap["n"], 4.0, 1.0)
    report = coupling.gradient_gap_check(
        family, gap["n"], gap["alpha"], gap["warmup"], gap["repeats"], derive_stream(seed, 50, 0)
    )
    all_rows.extend(report.rows)
    worst = report.worst()
    lines.append(
        _check_line(
            report.passed,
            "gradient_gap",
            f"n={gap['n']} repeats={gap['repeats']} worst_margin={_fmt(worst.margin)}",
        )
    )
    drift = scale["drift"]
    family = PiecewiseFamily(drift["n"], 4.0, 1.0)
    cfg = RunConfig(
        family=family, k_epochs=drift["k"], alpha=drift["alpha"], base_seed=seed, sweep_index=60
    )
    report = coupling.epoch_drift_check(family, cfg, drift["repeats"])
    all_rows.extend(report.rows)
    lines.append(
        _check_line(
            report.passed,
            "epoch_drift",
            f"n={drift['n']} repeats={drift['repeats']} "
            f"worst_margin={_fmt(report.worst().margin)}",
        )
    )
    pos = scale["posexp"]
    for idx, alpha in enumerate(pos["alphas"]):
        for label, family in (
            (f"posexp_a{alpha:g}", PiecewiseFamily(pos["n"], 4.0, 1.0)),
            (f"posexp_control_a{alpha:g}", make_f2(pos["n"])),
        ):
            cfg = RunConfig(
                family=family, k_epochs=pos["k"], alpha=alpha,
                base_seed=seed, sweep_index=70 + idx,
            )
            report = coupling.posexp_check(family, cfg, pos["repeats"])
            all_rows.extend(report.rows)
            lines.append(
                _check_line(
                    report.passed,
                    label,
                    f"n={pos['n']} K={pos['k']} worst_margin={_fmt(report.worst().margin)}",
                )
            )
    (out / "coupling.csv").write_text(coupling.rows_to_csv(all_rows), encoding="ascii")


def _verify_goldens(lines: list[str]) -> None:
    from fractions import Fraction

    checks = [
        ("splitmix64", splitmix64_sequence(0, 1)[0] == 0xE220A8397B1DCDAF),
        (
            "derive_state",
            derive_stream(0, 0, 0).state
            == (0xFEA1CD069D23F863, 0x68EDB7E67564DF46, 0xA858B3DC213268D2, 0x1BFACB190D1AF512),
        ),
        ("xoshiro_first", derive_stream(0, 0, 0).next_u64() == 0xE4A9C1515D9FA736),
        (
            "alpha_4lnT_T",
            abs(alpha_of(parse_regime("4lnT/T"), 100, 250, 1.0) - 0.001620260976616054)
            <= 1e-15 * 0.001620260976616054,
        ),
        ("pmf_spot", permstats.exact_distribution(8, 4).pmf[0] == Fraction(18, 35)),
        (
            "upper_bound_pin",
            abs(bounds.upper_bound_quadratic(10, 100, 1, 1, 1, 1, 2).bound_value - 10.161242585628955)
            <= 1e-13 * 10.161242585628955,
        ),
    ]
    for name, ok in checks:
        lines.append(_check_line(ok, f"golden_{name}", ""))


def _verify_once(out: Path, seed: int, suite: str, workers: int) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    scale = _SUITES[suite]
    lines: list[str] = []
    _verify_goldens(lines)
    _verify_permstats(scale, out, lines)
    _verify_oracle(scale, out, seed, lines)
    _verify_coupling(scale, out, seed, lines)
    _verify_sweeps(scale, out, seed, workers, lines)
    return lines


def _diff_trees(a: Path, b: Path) -> list[str]:
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    if files_a != files_b:
        return [f"file lists differ: {files_a} vs {files_b}"]
    diffs = []
    for rel in files_a:
        if (a / rel).read_bytes() != (b / rel).read_bytes():
            diffs.append(str(rel))
    return diffs


def cmd_verify(args) -> int:
    cfg = _gather(args, {"suite": "fast", **_COMMON_KEYS})
    suite = cfg["suite"]
    if suite not in _SUITES:
        raise ValueError(f"--suite must be fast or full, got {suite!r}")
    seed = _seed_of(cfg)
    workers = _workers_of(cfg)
    out = _out_dir(cfg, default="verify_out")
    if args.dry_run:
        print(f"plan: verify suite={suite} seed={seed} out={out} (two runs + byte diff)")
        return 0
    lines1 = _verify_once(out / "run1", seed, suite, workers)
    lines2 = _verify_once(out / "run2", seed, suite, workers)
    all_lines = list(lines1)
    diffs = _diff_trees(out / "run1", out / "run2")
    if lines1 != lines2:
        diffs.append("check summaries differ between runs")
    n_files = len([p for p in (out / "run1").rglob("*") if p.is_file()])
    all_lines.append(
        _check_line(not diffs, "determinism", f"files={n_files} identical across both runs")
    )
    for d in diffs:
        all_lines.append(f"  diff: {d}")
    failed = [ln for ln in all_lines if ln.startswith("FAIL")]
    all_lines.append(
        _check_line(not failed, "verify", f"suite={suite} seed={seed} checks={len(all_lines)}")
    )
    text = "\n".join(all_lines) + "\n"
    sys.stdout.write(text)
    (out / "verify.txt").write_text(text, encoding="ascii")
    return 0 if not failed else 2


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shuffle-sgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--seed", type=int, help=f"PRNG seed (fallback: ${ENV_SEED}, then 0)")
        sp.add_argument("--out", help="output directory for emitted files")
        sp.add_argument("--workers", type=int, help="worker processes (default: all cores)")
        sp.add_argument("--dry-run", action="store_true", help="print the plan, run nothing")

    p = sub.add_parser("run", help="one SGDo run; prints the final squared error")
    common(p)
    p.add_argument("--family", help="piecewise | f2 | product2d | quadratic")
    p.add_argument("--n", type=int, help="component count")
    p.add_argument("--k", type=int, help="epoch count")
    p.add_argument("--regime", help="step-size regime: 1/T, 1/n, [c]lnT/T, theorem1[(l)]")
    p.add_argument("--alpha", type=float, help="explicit constant step size")
    p.add_argument("--L", type=float, help="left curvature / smoothness parameter")
    p.add_argument("--G", type=float, help="gradient-bound parameter")
    p.add_argument("--per-epoch", action="store_true", help="also print per-epoch errors")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="error-vs-n or error-vs-K sweep with rate fit")
    common(p)
    p.add_argument("--family", help="family kind")
    p.add_argument("--sweep-var", help="K or N")
    p.add_argument("--grid", help="comma-separated sweep values")
    p.add_argument("--fixed", type=int, help="value of the non-swept variable")
    p.add_argument("--regime", help="step-size regime")
    p.add_argument("--repeats", type=int, help="Monte Carlo repeats per grid point")
    p.add_argument("--L", type=float)
    p.add_argument("--G", type=float)
    p.add_argument("--from-csv", help="fit a rate from an existing sweep CSV instead of running")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("permstats", help="exact permutation partial-sum statistics")
    common(p)
    p.add_argument("--n", type=int, help="print the exact pmf table for this n")
    p.add_argument("--check", action="store_true", help="run the exact inequality checks")
    p.add_argument("--n-max", type=int, help="largest n for --check (default 256)")
    p.set_defaults(func=cmd_permstats)

    p = sub.add_parser("couple", help="Monte Carlo coupling and stability checks")
    common(p)
    p.add_argument("--check", help="swap | gap | drift | posexp | all")
    p.add_argument("--family", help="family kind")
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--G", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--trials", type=int, help="trials for the swap check")
    p.add_argument("--repeats", type=int, help="repeats for the statistical checks")
    p.add_argument("--warmup", type=int, help="warmup epochs for the gradient-gap check")
    p.add_argument("--k", type=int, help="epoch count for drift/posexp")
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("bound", help="closed-form bound evaluators")
    common(p)
    p.add_argument("--which", help="upper | lower | window")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--G", type=float)
    p.add_argument("--D", type=float)
    p.add_argument("--l", type=float)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="run the self-check suite twice and byte-diff outputs")
    common(p)
    p.add_argument("--suite", help="fast | full")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
