"""Command-line front end.

    ionubs reproduce-fig4 [--config FILE] [--set section.key=value ...] [--output CSV] [--plot]
    ionubs separate       ...
    ionubs synthesize     ...
    ionubs simulate       ...
    ionubs selfcheck      [--coulomb derived|printed]

Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 numerical failure.
Sweeps run in parallel when UBS_THREADS > 1; rows are sorted before writing.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import plotting
from .circuit import MultiModeState, GaussianState, parse_circuit, run_circuit
from .config import RunConfig, load_config
from .errors import ConfigError, IonUBSError
from .fock_sim import CSV_HEADER, FockState, quartic_rwa_study, run_bs_experiment, run_separation_experiment
from .synth import nonlinear_gate, phase_profile, synthesize_displacement, synthesize_squeeze
from .two_ion import design_beam_splitter

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
THREADS_ENV = "UBS_THREADS"


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def render_csv(fh, meta, header, rows):
    """Commented metadata block, then header and rows with '\\n' line endings."""
    for k, v in meta:
        fh.write(f"# {k}={v}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def write_csv(path, meta, header, rows):
    with open(path, "w", newline="") as fh:
        render_csv(fh, meta, header, rows)


def _meta(cfg: RunConfig, command: str) -> list:
    p = cfg.params
    return [("generator", f"ionubs {_version()}"), ("command", command), ("config_sha256", cfg.digest()),
            ("mass_u", f"{cfg.run.mass_u:.10g}"), ("freq_hz", f"{cfg.run.freq_hz:.10g}"),
            ("l0_m", f"{p.l0:.6e}"), ("x0_m", f"{p.x0:.6e}"), ("eps", f"{p.eps:.6e}"),
            ("coulomb", cfg.run.coulomb)]


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def _fig4_cell(args):
    s2, n, cfg = args
    f = cfg.fig4
    r = run_bs_experiment(s2, n, n, pickup=f.pickup, n_cut=f.n_cut, theta=f.theta,
                          coulomb=cfg.run.coulomb, params=cfg.params)
    return (s2, n, r.fidelity, r.phase_error, r.duration, r.min_separation)


def cmd_reproduce_fig4(cfg: RunConfig, output: str, plot: bool = False) -> int:
    cells = [(s2, n, cfg) for s2 in cfg.fig4.sigma_sq for n in range(cfg.fig4.n_max + 1)]
    threads = _threads()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_fig4_cell, cells))
    else:
        results = [_fig4_cell(c) for c in cells]
    results.sort(key=lambda r: (r[0], r[1]))
    rows = [[f"{s2:g}", str(n), f"{fid:.10f}", f"{pe:.6e}", f"{dur:.6f}", f"{rmin:.6f}"]
            for s2, n, fid, pe, dur, rmin in results]
    write_csv(output, _meta(cfg, "reproduce-fig4"), CSV_HEADER, rows)
    for s2 in cfg.fig4.sigma_sq:
        sub = [r for r in results if r[0] == s2]
        us = cfg.params.seconds(sub[0][4]) * 1e6
        print(f"sigma^2={s2:g}: duration {sub[0][4]:.2f}/omega0 ({us:.2f} us), min sep {sub[0][5]:.3f} l0, "
              f"min fidelity {min(r[2] for r in sub):.5f}, max phase error {max(r[3] for r in sub):.2e} rad")
    if plot:
        print(f"plot: {plotting.plot_fidelity_sweep(results, output)}")
    return EXIT_OK


def cmd_separate(cfg: RunConfig, output: str, plot: bool = False) -> int:
    s = cfg.separate
    r = run_separation_experiment(s.sigma, s.target_distance, n_cut=s.n_cut, coulomb=cfg.run.coulomb,
                                  frozen=s.frozen, params=cfg.params)
    header = ["sigma", "target_distance_l0", "duration_over_omega0", "duration_us",
              "excitation_plus", "excitation_minus"]
    row = [f"{s.sigma:g}", f"{r.extra['target_distance']:.6f}", f"{r.duration:.6f}",
           f"{cfg.params.seconds(r.duration) * 1e6:.6f}", f"{r.extra['excitation_plus']:.6e}",
           f"{r.extra['excitation_minus']:.6e}"]
    write_csv(output, _meta(cfg, "separate"), header, [row])
    print(f"duration {r.duration:.3f}/omega0, excitation (+, -) = "
          f"({r.extra['excitation_plus']:.2e}, {r.extra['excitation_minus']:.2e}) quanta")
    if plot:
        from .two_ion import design_separation
        d = design_separation(s.sigma, s.target_distance, cfg.run.coulomb)
        tr = d.trajectory
        print(f"plot: {plotting.plot_separation(tr.times, tr.r, np.sqrt(tr.omega_minus_sq), output)}")
    return EXIT_OK


def cmd_synthesize(cfg: RunConfig, output: str, plot: bool = False) -> int:
    s = cfg.synthesize
    meta = _meta(cfg, "synthesize") + [("gate", s.gate), ("value", f"{s.value:.10g}"),
                                         ("duration", f"{s.duration:.10g}")]
    if s.gate == "beamsplitter":
        d = design_beam_splitter(s.value.real, s.sigma, coulomb=cfg.run.coulomb)
        report, residual = d.report(), abs(d.theta - s.value.real)
        tr = d.trajectory
        header = ["t_over_omega0", "A", "B", "r_over_l0", "omega_plus", "omega_minus"]
        rows = [[f"{t:.10g}", f"{a:.10g}", f"{b:.10g}", f"{r:.10g}", f"{np.sqrt(wp):.10g}", f"{np.sqrt(wm):.10g}"]
                for t, a, b, r, wp, wm in zip(tr.times, d.schedule.A(tr.times), d.schedule.B(tr.times),
                                              tr.r, tr.omega_plus_sq, tr.omega_minus_sq)]
        times, values, label = tr.times, tr.r, "separation $r/l_0$"
    else:
        if s.gate == "displacement":
            ctl = synthesize_displacement(s.value, s.duration)
        elif s.gate == "phase":
            ctl = phase_profile(s.value.real, s.sigma, s.duration)
        elif s.gate == "squeeze":
            ctl = synthesize_squeeze(s.value, s.duration)
        else:
            ctl = nonlinear_gate(s.value.real, s.duration, s.n_max)
            ctl.report["rwa_infidelity"] = quartic_rwa_study(s.value.real, s.duration, s.n_max)
        report, residual = dict(ctl.report), ctl.residual
        prof = ctl.profile
        header = ["t_over_omega0", prof.name]
        rows = [[f"{t:.12g}", f"{v:.12g}"] for t, v in zip(prof.times, prof.samples)]
        times, values, label = prof.times, prof.samples, prof.name
    report.pop("bogoliubov", None)
    meta += [(k, f"{v:.10g}" if isinstance(v, (float, complex, np.floating)) else v) for k, v in report.items()]
    meta.append(("residual", f"{residual:.3e}"))
    write_csv(output, meta, header, rows)
    for k, v in report.items():
        print(f"{k}: {v}")
    print(f"residual: {residual:.3e}")
    if plot:
        print(f"plot: {plotting.plot_profile(times, values, label, output)}")
    if residual > s.tolerance:
        print(f"synthesis residual {residual:.3e} exceeds tolerance {s.tolerance:g}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, output: str, plot: bool = False) -> int:
    s = cfg.simulate
    if not s.circuit:
        raise ConfigError("simulate.circuit must name a circuit file")
    try:
        with open(s.circuit) as fh:
            n_modes, ops = parse_circuit(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read circuit {s.circuit}: {exc}") from exc
    alphas = list(s.inputs) or [0j] * n_modes
    if len(alphas) != n_modes:
        raise ConfigError(f"simulate.inputs has {len(alphas)} values for {n_modes} modes")
    meta = _meta(cfg, "simulate") + [("circuit", os.path.basename(s.circuit)), ("modes", n_modes)]
    res = run_circuit(ops, n_modes, s.backend, s.n_cut, gaussian_input=GaussianState.coherent(alphas),
                      fock_input=MultiModeState.product([FockState.coherent(a, s.n_cut) for a in alphas]))
    meta += [("backend", res.backend), ("success_probability", f"{res.success_probability:.12g}")]
    if res.backend == "gaussian":
        g = res.state
        rows = [["mean", str(i), "", f"{v:.12g}"] for i, v in enumerate(g.mean)]
        rows += [["cov", str(i), str(j), f"{g.covariance[i, j]:.12g}"]
                 for i in range(g.mean.size) for j in range(g.mean.size)]
        write_csv(output, meta, ["quantity", "i", "j", "value"], rows)
        print(f"gaussian backend: mean {np.round(g.mean, 6)}")
        return EXIT_OK
    dist = []
    if res.state is not None:
        probs = np.abs(res.state.tensor) ** 2
        for m in range(n_modes):
            marg = probs.sum(axis=tuple(k for k in range(n_modes) if k != m))
            dist += [(m, n, float(p)) for n, p in enumerate(marg)]
    write_csv(output, meta, ["mode", "n", "probability"], [[str(m), str(n), f"{p:.12g}"] for m, n, p in dist])
    print(f"fock backend: success probability {res.success_probability:.6g}")
    if plot and dist:
        print(f"plot: {plotting.plot_distribution(dist, output)}")
    return EXIT_OK


def cmd_selfcheck(cfg: RunConfig) -> int:
    from .selfcheck import run_all
    checks = run_all(cfg.run.coulomb, cfg.params)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed and not c.expected_fail]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed or expected-fail")
    return EXIT_INVARIANT if failed else EXIT_OK


COMMANDS = {"reproduce-fig4": cmd_reproduce_fig4, "separate": cmd_separate,
            "synthesize": cmd_synthesize, "simulate": cmd_simulate, "selfcheck": cmd_selfcheck}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ionubs", description="Trapped-ion bosonic simulator toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--coulomb", choices=["derived", "printed"], help="shortcut for --set run.coulomb=...")
        if name != "selfcheck":
            p.add_argument("--output", "-o", help="CSV path (default: run.output)")
            p.add_argument("--plot", action="store_true", help="also write a PNG next to the CSV")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
            overrides[key.strip()] = value.strip()
        if args.coulomb:
            overrides["run.coulomb"] = args.coulomb
        cfg = load_config(args.config, overrides)
        if args.command == "selfcheck":
            return cmd_selfcheck(cfg)
        output = args.output or cfg.run.output
        return COMMANDS[args.command](cfg, output, args.plot)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IonUBSError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
