"""Command-line entry point.

Subcommands: verify-identities, phase-solve, construct, decay-study,
picard-check. Exit codes: 0 pass, 1 tolerance breach, 2 config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import RunConfig
from .errors import ConfigError, ContractViolation, DomainError, NumericalFailure

log = logging.getLogger("hartree_mwo")

EXIT_PASS, EXIT_BREACH, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


class Run:
    """A run directory: resolved config, versions and verdicts."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.dir = Path(cfg["output_dir"]) / command
        self.dir.mkdir(parents=True, exist_ok=True)
        self.verdicts = {}
        self.report = {}
        (self.dir / "config.json").write_text(cfg.to_json())
        import scipy

        versions = {"hartree_mwo": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                    "python": platform.python_version(), "kernel_backend": kernels.BACKEND}
        (self.dir / "versions.json").write_text(json.dumps(versions, indent=2, sort_keys=True))

    def check(self, name, value, bound, sense="<="):
        ok = bool(value <= bound) if sense == "<=" else bool(value >= bound)
        if isinstance(value, float) and math.isnan(value):
            ok = False
        self.verdicts[name] = {"value": _jsonable(value), "bound": bound, "sense": sense, "pass": ok}
        log.info("%-36s %s %s %s -> %s", name, _jsonable(value), sense, bound, "PASS" if ok else "FAIL")
        return ok

    def flag(self, name, ok, note=""):
        self.verdicts[name] = {"pass": bool(ok), "note": note}
        return ok

    def finish(self):
        (self.dir / "verdicts.json").write_text(json.dumps(self.verdicts, indent=2, sort_keys=True))
        (self.dir / "report.json").write_text(json.dumps(_jsonable(self.report), indent=2,
                                                         sort_keys=True))
        return EXIT_PASS if all(v["pass"] for v in self.verdicts.values()) else EXIT_BREACH


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# ------------------------------------------------------------ shared setup

def phase_knots(cfg, extra=()):
    from .diagnostics import log_knots

    ph = cfg["phase"]
    t_min, T_end = float(ph["t_min"]), float(ph["T_end"])
    knots = set(log_knots(t_min, T_end, int(ph["knots_per_decade"])).tolist())
    knots.update(T_end / 2**k for k in range(0, 6) if T_end / 2**k >= t_min)
    knots.update(float(t) for t in extra)
    return sorted(knots)


def solve_phase_for(cfg, grid, c0, knots):
    """Phase table per the config (auto or fixed T1) plus its certificate."""
    from . import hamilton_jacobi as hj

    ph = cfg["phase"]
    cut = hj.build_chi(c0, grid if cfg["geometry"] == "cubic" else None)
    kw = {"n_traj": int(ph["n_traj"])}
    # the terminal condition sits at the last knot when knots run past T_end
    T_end = max(float(ph["T_end"]), max(knots))
    coulomb = bool(ph["coulomb"])
    cert_from = ph["certify_from"]
    if ph["T1"] == "auto":
        T1, table, cert = hj.select_T1(cut, grid, knots, T_end=T_end,
                                       grad_budget=float(ph["grad_budget"]),
                                       lap_budget=float(ph["lap_budget"]), coulomb=coulomb,
                                       certify_t_min=cert_from, **kw)
    else:
        T1 = float(ph["T1"])
        table = hj.solve_phase(cut, T1, grid, knots, T_end=T_end, coulomb=coulomb, **kw)
        cert = hj.certify_phase(table, grad_budget=float(ph["grad_budget"]),
                                lap_budget=float(ph["lap_budget"]), t_min=cert_from)
    return cut, table, cert


# ------------------------------------------------------------ subcommands

def cmd_verify_identities(cfg):
    from . import profile as pf
    from .field_ops import dilate
    from .hamilton_jacobi import select_T1, build_chi

    run = Run(cfg, "verify-identities")
    grid, datum = cfg.identity_setup()
    s = cfg["identity"]
    times = [float(t) for t in s["times"]]
    tU = float(s["U_time"])
    if datum.l2_norm == 0:
        log.warning("zero datum: identities hold vacuously")
        run.flag("zero_datum_vacuous", True, "zero datum; identity battery is vacuous")
        return run.finish()
    knots = sorted(set(times) | {tU, 2.0, 100.0})
    T1, table, _ = select_T1(build_chi(datum.c0, grid), grid, knots, T_end=max(knots))
    ctx = pf.ProfileContext(datum, table, grid, b=float(cfg["scattering"]["b"]))
    u = np.abs(datum.uhat_plus.values)
    w_mod = max(float(np.max(np.abs(np.abs(pf.build_W(ctx, t).values) - u))) for t in (2, 10, 100))
    run.check("W_modulus_sup", w_mod / max(u.max(), 1e-300), 1e-12)
    gap = max(pf._rel_l2(pf.build_profile(ctx, t).values, pf.build_profile_direct(ctx, t).values,
                         grid) for t in times)
    run.check("profile_two_forms_rel_l2", gap, 1e-10)
    run.check("F_up_factorization_rel_l2", max(pf.profile_nonlinearity_identity(ctx, t)
                                                for t in times), 1e-6)
    parts = [pf.decompose_U(ctx, tU, j, datum.uhat_plus, enforce_regime=False) for j in (1, 2, 3)]
    ref = pf._phase_factor(ctx, tU, grid) * dilate(datum.uhat_plus, tU, out_grid=grid).values
    run.check("U_sum_rel_l2", pf._rel_l2(sum(p.values for p in parts), ref, grid), 1e-10)
    run.check("hartree_scaling_sup_rel", pf.potential_scaling_identity(ctx, max(times)), 1e-6)
    run.report = {"T1": T1, "times": times, "U_time": tU}
    return run.finish()


def cmd_phase_solve(cfg):
    from . import hamilton_jacobi as hj

    run = Run(cfg, "phase-solve")
    grid = cfg.grid()
    c0 = float(cfg["datum"]["c0"])
    knots = phase_knots(cfg)
    cut, table, cert = solve_phase_for(cfg, grid, c0, knots)
    table.save(run.dir / "phase")
    ph = cfg["phase"]
    R = 0.5 * grid.extent
    radii = hj.probe_radii(R, 512, seed=int(cfg["seed"]))
    probe_t = [t for t in knots[:: max(1, len(knots) // 6)]]
    res = hj.hj_residual(cut, table.T1, grid, probe_t, float(ph["T_end"]), radii,
                         coulomb=bool(ph["coulomb"]), n_traj=int(ph["n_traj"]))
    run.check("hj_residual_sup", float(np.max(res)), float(ph["tol_hj"]))
    run.check("grad_gauge", cert.grad_constant, cert.grad_budget)
    run.check("lap_gauge", cert.lap_constant, cert.lap_budget)
    run.flag("deviation_trend_nonincreasing", cert.trend_ok)
    run.report = {"T1": table.T1, "certificate": cert.as_dict(), "knots": knots,
                  "grad_deviation": cert.grad_deviation, "lap_deviation": cert.lap_deviation}
    return run.finish()


def _context(cfg, extra_knots=()):
    from .profile import ProfileContext

    grid = cfg.grid()
    datum = cfg.datum()
    knots = phase_knots(cfg, extra_knots)
    _, table, cert = solve_phase_for(cfg, grid, datum.c0, knots)
    ctx = ProfileContext(datum, table, grid, b=float(cfg["scattering"]["b"]))
    return ctx, knots, cert


def cmd_construct(cfg):
    from .io import save_field, write_csv
    from .scattering import modified_wave_operator

    run = Run(cfg, "construct")
    ctx, knots, _ = _context(cfg)
    T_end = float(cfg["phase"]["T_end"])
    t_out = float(cfg["scattering"]["t_out"])
    res = modified_wave_operator(ctx, T_end, t_out, cfg.evolution(),
                                 record_times=[t for t in knots if t >= t_out],
                                 pairs=cfg.pairs())
    save_field(run.dir / "u_out.fld", res.u_out)
    full = res.deficits["full"]
    rs = sorted(full.lr)
    rows = [[t, full.l2[k]] + [full.lr[r][k] for r in rs] + [res.mass_series[k], res.leakage_series[k]]
            for k, t in enumerate(res.times)]
    write_csv(run.dir / "deficit.csv", ["t", "l2"] + [f"L{r:g}" for r in rs] + ["mass", "leakage"],
              rows)
    m0 = ctx.datum.l2_norm
    from .field_ops import lebesgue_norm

    run.check("output_norm_rel", abs(lebesgue_norm(res.u_out, 2) / m0 - 1.0), 1e-6)
    run.flag("leakage_ok", not res.leakage_flag, f"max leakage {float(np.max(res.leakage_series)):.3g}")
    run.report = {"T1": ctx.T1, "steps": res.steps}
    return run.finish()


def cmd_decay_study(cfg):
    from .diagnostics import ablation_study

    run = Run(cfg, "decay-study")
    T_end = float(cfg["phase"]["T_end"])
    extra = [T_end / 4, T_end / 2]
    ctx, knots, _ = _context(cfg, extra)
    d = cfg["diagnostics"]
    rep, _ = ablation_study(ctx, T_end, cfg.evolution(), t_out=float(cfg["scattering"]["t_out"]),
                            window=tuple(d["window"]),
                            per_decade=int(cfg["phase"]["knots_per_decade"]), pairs=cfg.pairs(),
                            min_points=int(d["min_points"]), extra_times=extra)
    (run.dir / "decay.csv").write_text(rep.to_csv())
    (run.dir / "decay_summary.json").write_text(rep.to_json())
    if d["plot"]:
        try:
            rep.plot(run.dir / "decay.png")
        except ImportError:
            log.warning("matplotlib not installed; skipping plot")
    run.check("l2_slope", rep.fitted_slope, -0.2)
    for label, s in rep.mixed_slopes.items():
        run.check(f"mixed_slope_{label}", s, 0.0)
    if d["ablations"]:
        k = int(np.argmin(np.abs(rep.times - T_end / 4)))
        full, nolog = rep.l2_deficit[k], rep.ablation_deficits["no_log"][k]
        run.check("no_log_over_full_at_T/4", nolog / full if full > 0 else math.inf, 5.0, ">=")
        orc = rep.no_log_oracle[k]
        run.check("no_log_vs_oracle_rel", abs(nolog / orc - 1.0) if orc > 0 else math.inf, 0.10)
        early = rep.times <= T_end / 2 * (1 + 1e-12)
        dom = bool(np.all(rep.ablation_deficits["free_phase"][early] >= rep.l2_deficit[early]))
        run.flag("free_phase_dominates", dom)
    run.report = rep.summary()
    return run.finish()


def cmd_picard_check(cfg):
    from .field_ops import AdmissiblePair
    from .io import write_csv
    from .scattering import XNormSpec, picard_iterate
    from .errors import PicardDivergence

    run = Run(cfg, "picard-check")
    sc = cfg["scattering"]
    T, S = float(sc["T"]), float(sc["S_max"])
    spec = XNormSpec.log_spaced(T, S, int(sc["n_knots"]), float(sc["b"]), AdmissiblePair(4, 3))
    times = np.asarray(spec.sample_times)
    delta = sc["fd_step"]
    delta = 0.25 * float(np.min(np.diff(times))) if delta is None else float(delta)
    delta = min(delta, 0.25 * float(times[0]) - 1e-9, 1e-2 * float(times[0]))
    from .scattering import phase_times

    ctx, _, _ = _context(cfg, phase_times(times, delta))
    try:
        state = picard_iterate(ctx, spec, int(sc["n_iters"]), cfg.evolution(), delta=delta)
    except PicardDivergence as exc:
        st = exc.state
        if st is not None:
            write_csv(run.dir / "picard.csv", ["iterate", "x_norm", "increment", "ratio"],
                      st.as_rows())
        run.report = {"diverged": str(exc)}
        run.finish()
        raise
    write_csv(run.dir / "picard.csv", ["iterate", "x_norm", "increment", "ratio"], state.as_rows())
    if state.ratio_history:
        run.check("contraction_ratio_n2", state.ratio_history[0], 0.5)
    run.report = {"x_norm": state.x_norm, "ratios": state.ratio_history}
    return run.finish()


COMMANDS = {
    "verify-identities": cmd_verify_identities,
    "phase-solve": cmd_phase_solve,
    "construct": cmd_construct,
    "decay-study": cmd_decay_study,
    "picard-check": cmd_picard_check,
}


def build_parser():
    p = argparse.ArgumentParser(prog="hartree-mwo", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, default=None, help="JSON config file")
    p.add_argument("--output", type=Path, default=None, help="run output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, value parsed as JSON when possible")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config, args.override, args.seed, args.output)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ContractViolation, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
