"""Command-line entry point.

Every subcommand reads one config file, writes one CSV into the output
directory and returns an exit code::

    0  success
    2  configuration error (including argument errors)
    3  verification failure
    4  numerical blow-up

CSV files start with ``#`` metadata lines holding the fully resolved
configuration and derived quantities, then a header row. Floats are written
with ``repr`` so files round-trip exactly. The only line that varies between
identical runs is ``# generated = ...``, which ``--no-timestamp`` drops.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from ._backend import BACKEND
from .analysis import (
    PhaseSeries,
    histogram_peaks,
    phase_histogram,
    winding_from_phase,
    zero_crossing_phase,
)
from .circle_map import (
    find_limit_cycle,
    invertibility_margin,
    iterate_orbit,
    map_step,
    tongue_boundary_half,
)
from .config import ConfigError, RunConfig, load_config, resolve
from .envelope import (
    ModulationSpec,
    NumericalBlowUp,
    calibration_power,
    compare_with_map,
    hopf_frequency,
    integrate_ensemble,
    seo_amplitude,
)
from .physical import integrate_full, modulated_power, static_equilibrium
from .scans import ScanGrid, arnold_tongue_scan, plateau_detect, staircase_scan

__all__ = ["main", "COMMANDS", "write_csv", "read_csv"]

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_BLOWUP = 0, 2, 3, 4


class VerificationFailed(RuntimeError):
    pass


@dataclass
class Context:
    cfg: RunConfig
    out_dir: Path
    threads: int
    timestamp: bool
    command: str

    def meta(self, extra: Optional[dict] = None) -> list[str]:
        lines = [f"command = {self.command}", f"version = {__version__}",
                 f"backend = {BACKEND}"]
        if self.cfg.source:
            lines.append(f"config = {self.cfg.source}")
        lines += self.cfg.lines()
        for k, v in (extra or {}).items():
            lines.append(f"derived.{k} = {_cell(v)}")
        if self.timestamp:
            lines.append(f"generated = {datetime.now(timezone.utc).isoformat()}")
        return lines


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence],
              meta: Sequence[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Inverse of :func:`write_csv`: ``(metadata, header, rows)`` with cells as strings."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" = ")
                meta[key] = value
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def cmd_staircase(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg)
    s, mp = cfg["scan"], cfg["map"]
    grid = ScanGrid(s["alpha_min"], s["alpha_max"], s["n_alpha"])
    stair = staircase_scan(grid, res.map_params.beta_f, res.map_params,
                           n_transient=mp["n_transient"], n_avg=mp["n_avg"], q0=mp["q0"],
                           threads=ctx.threads)
    plateaus = plateau_detect(stair, s["farey_order"], s["plateau_tol"])
    labels = [""] * len(stair)
    for pl in plateaus:
        inside = (stair.alpha >= pl.alpha_lo) & (stair.alpha <= pl.alpha_hi)
        for i in np.flatnonzero(inside):
            labels[i] = f"{pl.rational.numerator}/{pl.rational.denominator}"
    extra = dict(res.derived, beta_f_scan=res.map_params.beta_f, n_plateaus=len(plateaus),
                 plateaus=" ".join(f"{p.rational}:[{p.alpha_lo!r},{p.alpha_hi!r}]"
                                   for p in plateaus))
    rows = zip(stair.alpha, stair.W, labels)
    write_csv(ctx.out_dir / "staircase.csv", ["alpha", "W", "plateau_label"], rows,
              ctx.meta(extra))
    return EXIT_OK


def cmd_tongue(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg)
    s, mp = cfg["scan"], cfg["map"]
    grid = ScanGrid(s["alpha_min"], s["alpha_max"], s["n_alpha"], s["beta_min"],
                    s["beta_max"], s["n_beta"])
    result = arnold_tongue_scan(grid, res.map_params, n_transient=mp["n_transient"],
                                n_avg=mp["n_avg"], q0=mp["q0"], threads=ctx.threads)

    def rows():
        for i, b in enumerate(result.betas):
            for j, a in enumerate(result.alphas):
                inside = int(b >= tongue_boundary_half(a - 0.5))
                yield a, b, result.W[i, j], result.dW_dalpha[i, j], inside
    extra = dict(res.derived, dW_dalpha="central differences; one-sided at the alpha ends",
                 analytic_boundary_flag="1 where beta_f >= (81/(128 pi))^(1/3) |alpha-1/2|^(2/3)")
    write_csv(ctx.out_dir / "tongue.csv",
              ["alpha", "beta_f", "W", "dW_dalpha", "analytic_boundary_flag"], rows(),
              ctx.meta(extra))
    return EXIT_OK


def cmd_orbit(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg)
    mp = cfg["map"]
    orb = iterate_orbit(mp["q0"], mp["n_iter"], res.map_params)
    extra = dict(res.derived, invertibility_margin=invertibility_margin(res.map_params))
    rows = zip(range(orb.lifted.size), orb.lifted, orb.wrapped)
    write_csv(ctx.out_dir / "orbit.csv", ["n", "q_lifted", "q_wrapped"], rows, ctx.meta(extra))
    return EXIT_OK


def cmd_cycle(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg)
    mp = cfg["map"]
    cyc = find_limit_cycle(res.map_params, mp["n2_max"], mp["tol"])
    extra = dict(res.derived)
    rows = []
    if cyc is None:
        extra["cycle"] = "none"
    else:
        extra.update(period=cyc.period_n2, rotation=cyc.rotation_n1,
                     multiplier=cyc.multiplier, stable=cyc.stable)
        for i, q in enumerate(cyc.points):
            rows.append((i, q, map_step(q, res.map_params)))
    write_csv(ctx.out_dir / "cycle.csv", ["index", "q", "f_q"], rows, ctx.meta(extra))
    return EXIT_OK


def _periods_span(env, n_periods: float) -> float:
    return n_periods * 2.0 * math.pi / hopf_frequency(env)


def cmd_envelope(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg, need_envelope=True)
    env, integ, noise = res.envelope, cfg["integration"], cfg["noise"]
    a0 = integ["amplitude0"] if integ["amplitude0"] is not None else seo_amplitude(env)
    trajs = integrate_ensemble(env, res.modulation, a0, _periods_span(env, integ["n_periods"]),
                               max(1, noise["ensemble"]), integ["dt"], noise["seed"],
                               coupling=res.coupling, stride=integ["stride"],
                               threads=ctx.threads)

    def rows():
        for m, tr in enumerate(trajs):
            for t, a in zip(tr.times, tr.A):
                yield m, t, a.real, a.imag, abs(a)
    extra = dict(res.derived, dt=trajs[0].dt)
    write_csv(ctx.out_dir / "envelope.csv", ["member", "t", "A_re", "A_im", "abs_A"], rows(),
              ctx.meta(extra))
    return EXIT_OK


def cmd_full(ctx: Context) -> int:
    cfg = ctx.cfg
    if cfg["run"]["level"] != "physical":
        raise ConfigError("the full model needs [run] level = physical")
    res = resolve(cfg)
    phys, env = res.physical, res.envelope
    integ = cfg["integration"]
    extra = dict(res.derived)
    mod = res.modulation
    if mod.amplitude and mod.P_p is None:
        # express the map amplitude as a power through the calibration
        P_p = mod.beta_f * calibration_power(env, res.coupling)
        mod = ModulationSpec(ratio=mod.ratio, waveform=mod.waveform, P_p=P_p,
                             phase0=mod.phase0)
        extra["P_p"] = P_p
    if mod.amplitude:
        peak = sum(h.beta for h in mod.harmonics())
        if peak > phys.P0:
            raise ConfigError(f"modulation swing {peak:.4g} W exceeds the static power "
                              f"{phys.P0:.4g} W; the injected power would turn negative")
    power = modulated_power(phys.P0, mod if mod.amplitude else None,
                            mod.ratio * hopf_frequency(env))
    x_s, T_s = static_equilibrium(phys)
    a0 = integ["amplitude0"] if integ["amplitude0"] is not None else 2.0 * seo_amplitude(env)
    t_span = integ["n_periods"] * 2.0 * math.pi / phys.omega0
    tr = integrate_full(phys, power, x_s + a0, 0.0, T_s, t_span, integ["dt"],
                        stride=integ["stride"])
    write_csv(ctx.out_dir / "full.csv", ["t", "x", "T_R"], zip(tr.times, tr.x, tr.T_R),
              ctx.meta(extra))
    return EXIT_OK


def cmd_histogram(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg, need_envelope=True)
    env, integ, noise, h = res.envelope, cfg["integration"], cfg["noise"], cfg["histogram"]
    omega_h = hopf_frequency(env)
    a0 = integ["amplitude0"] if integ["amplitude0"] is not None else seo_amplitude(env)
    trajs = integrate_ensemble(env, res.modulation, a0, _periods_span(env, integ["n_periods"]),
                               max(1, noise["ensemble"]), integ["dt"], noise["seed"],
                               coupling=res.coupling, threads=ctx.threads)
    qs = []
    for tr in trajs:
        ps = zero_crossing_phase(tr.A.real, tr.dt, res.modulation.ratio * omega_h,
                                 res.modulation.phase0, min_separation=1.5 * math.pi / omega_h)
        qs.append(ps)
    pooled = PhaseSeries(np.concatenate([p.q for p in qs]),
                         np.arange(sum(len(p) for p in qs)))
    hist = phase_histogram(pooled, h["n_bins"])
    peaks = histogram_peaks(hist, h["peak_level"])
    alpha = res.map_params.alpha
    extra = dict(res.derived, n_samples=len(pooled), n_peaks=len(peaks),
                 peaks=" ".join(repr(p) for p in peaks),
                 winding=float(np.mean([winding_from_phase(p, alpha) for p in qs])),
                 max_min_ratio=(float(hist.density.max() / hist.density.min())
                                if hist.density.min() > 0 else math.inf))
    rows = zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.density)
    write_csv(ctx.out_dir / "histogram.csv", ["bin_lo", "bin_hi", "density"], rows,
              ctx.meta(extra))
    return EXIT_OK


def cmd_verify_map(ctx: Context) -> int:
    cfg = ctx.cfg
    res = resolve(cfg, need_envelope=True)
    v = cfg["verify"]
    cmp = compare_with_map(res.envelope, res.modulation, v["n_periods"], cfg["integration"]["dt"],
                           res.coupling)
    max_err = cmp.max_error
    passed = max_err <= v["threshold"]
    extra = dict(res.derived, max_abs_error=max_err,
                 max_one_step_error=float(cmp.one_step_error.max()),
                 threshold=v["threshold"], passed=passed)
    rows = zip(cmp.n, cmp.q_map, cmp.q_envelope, cmp.abs_error, cmp.one_step_error)
    write_csv(ctx.out_dir / "verify_map.csv",
              ["n", "q_map", "q_envelope", "abs_error", "one_step_error"], rows, ctx.meta(extra))
    if not passed:
        raise VerificationFailed(
            f"max |q_map - q_envelope| = {max_err:.4g} exceeds threshold {v['threshold']:g}")
    return EXIT_OK


COMMANDS = {
    "staircase": cmd_staircase,
    "tongue": cmd_tongue,
    "orbit": cmd_orbit,
    "cycle": cmd_cycle,
    "envelope": cmd_envelope,
    "full": cmd_full,
    "histogram": cmd_histogram,
    "verify-map": cmd_verify_map,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seolock", description=(
        "Phase locking of a modulated self-oscillator: map scans, envelope and "
        "full-model simulations, phase statistics."))
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", metavar="PATH", help="INI-style run configuration")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides [output])")
    ap.add_argument("--seed", type=int, help="noise seed (overrides [noise] seed)")
    ap.add_argument("--no-timestamp", action="store_true",
                    help="omit the generation time so reruns are byte-identical")
    ap.add_argument("--threads", type=int, default=0, metavar="N",
                    help="worker threads; 0 uses all available CPUs (results do not depend on N)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            cfg.values["noise"]["seed"] = args.seed
        if args.out is not None:
            cfg.values["output"]["directory"] = args.out
        ctx = Context(cfg=cfg, out_dir=Path(cfg["output"]["directory"]), threads=args.threads,
                      timestamp=not args.no_timestamp, command=args.command)
        return COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"seolock: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailed as exc:
        print(f"seolock: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except NumericalBlowUp as exc:
        print(f"seolock: numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
