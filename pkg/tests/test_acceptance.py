"""Acceptance criteria, one test each.

Every test records a single ``PASS``/``FAIL`` line with the measured
quantities; the lines are printed together at the end of the pytest report
(and immediately with ``pytest -s``).
"""
import subprocess
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE_LINES, ENVELOPE
from seolock import cli
from seolock.circle_map import (
    MapParams,
    Rectangular,
    farey_sequence,
    find_limit_cycle,
    tongue_boundary_half,
    winding_number,
)
from seolock.envelope import EnvelopeParams, integrate_envelope, seo_amplitude
from seolock.scans import plateau_detect, staircase_scan, tongue_edge_trace

TESTS = Path(__file__).parent


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] #{number} {title}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert passed, line


def test_1_rigid_rotation_limit():
    alphas = np.random.default_rng(2024).uniform(0, 1, 50)
    start = time.perf_counter()
    err = max(abs(winding_number(MapParams(a, 0.0)) - a) for a in alphas)
    elapsed = time.perf_counter() - start
    record(1, "rigid rotation", err <= 1e-9 and elapsed < 1.0,
           f"max |W - alpha| = {err:.2e} over 50 alphas (<= 1e-9), {elapsed:.2f} s (< 1 s)")


def test_2_staircase_plateaus():
    start = time.perf_counter()
    s = staircase_scan(np.linspace(1e-4, 1 - 1e-4, 2000), 0.0355, MapParams(0.5, 0.0), threads=0)
    plateaus = plateau_detect(s)
    elapsed = time.perf_counter() - start
    found = {p.rational for p in plateaus}
    worst = 0.0
    for p in plateaus:
        inside = (s.alpha >= p.alpha_lo) & (s.alpha <= p.alpha_hi)
        worst = max(worst, float(np.abs(s.W[inside] - float(p.rational)).max()))
    missing = sorted(set(farey_sequence(5)) - found)
    ok = not missing and worst <= 1e-4 and elapsed < 60
    record(2, "staircase at beta_f = 0.0355", ok,
           f"{len(found & set(farey_sequence(5)))}/11 order-5 plateaus"
           f"{' (missing ' + ', '.join(map(str, missing)) + ')' if missing else ''}, "
           f"max |W - p/q| = {worst:.1e} (<= 1e-4), {elapsed:.1f} s (< 60 s)")


def test_3_limit_cycles():
    wf = Rectangular(duty=0.25)
    c3 = find_limit_cycle(MapParams(1 / 3, 0.025, wf))
    c5 = find_limit_cycle(MapParams(2 / 5, 0.028, wf))
    ok = (c3 is not None and (c3.period_n2, c3.rotation_n1) == (3, 1) and c3.stable
          and c5 is not None and (c5.period_n2, c5.rotation_n1) == (5, 2) and c5.stable)

    def show(c):
        return "none" if c is None else (f"period {c.period_n2}, rotation {c.rotation_n1}, "
                                         f"|multiplier| = {abs(c.multiplier):.3f}")
    record(3, "limit cycles (rectangular, duty 0.25)", ok,
           f"alpha 1/3: {show(c3)}; alpha 2/5: {show(c5)}")


def test_4_tongue_boundary():
    start = time.perf_counter()
    parts, ok = [], True
    for eps in (1e-3, 3e-3, 1e-2):
        beta = tongue_boundary_half(eps)
        traced = tongue_edge_trace(Fraction(1, 2), [beta], MapParams(0.5, 0.0))
        if not traced:
            ok = False
            parts.append(f"eps {eps:g}: no plateau")
            continue
        half = traced[0][2] - 0.5
        rel = abs(half - eps) / eps
        ok &= rel <= 0.10
        parts.append(f"eps {eps:g}: traced {half:.3e} (rel err {rel:.0%})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    record(4, "1/2-tongue edges vs analytic boundary (10 %)", ok,
           "; ".join(parts) + f"; {elapsed:.1f} s (< 120 s)")


def test_5_envelope_map_oracle(tmp_path):
    code = cli.main(["verify-map", "--out", str(tmp_path), "--no-timestamp"])
    meta, _, rows = cli.read_csv(tmp_path / "verify_map.csv")
    err = float(meta["derived.max_abs_error"])
    record(5, "verify-map at alpha 1/3, beta_f 0.01", code == 0 and err <= 1e-2,
           f"max |q_map - q_envelope| = {err:.4f} over {len(rows) - 1} periods (<= 1e-2), "
           f"exit code {code}")


def test_6_hopf_amplitude():
    p = EnvelopeParams(**ENVELOPE)
    a_r0 = seo_amplitude(p)
    starts = [1e-6, 1e-3, 0.1, 0.5, 0.9, 1.0, 1.5, 2.0, 2.5, 3.0]
    worst = 0.0
    for s in starts:
        tr = integrate_envelope(p, None, s * a_r0, 400.0, stride=1000)
        worst = max(worst, abs(abs(tr.A[-1]) - a_r0) / a_r0)
    record(6, "Hopf amplitude", worst <= 1e-6,
           f"max relative |A| error {worst:.1e} from {len(starts)} starts in (0, 3 A_r0] "
           f"(<= 1e-6)")


def _histogram(tmp_path, beta):
    cfg = tmp_path / f"hist_{beta}.ini"
    cfg.write_text(f"[map]\nbeta_f = {beta}\n[integration]\nn_periods = 10100\n")
    out = tmp_path / f"hist_{beta}"
    assert cli.main(["histogram", "--config", str(cfg), "--out", str(out),
                     "--no-timestamp"]) == 0
    meta, _, _ = cli.read_csv(out / "histogram.csv")
    return int(meta["derived.n_peaks"]), float(meta["derived.max_min_ratio"]), \
        int(meta["derived.n_samples"])


def test_7_phase_statistics(tmp_path):
    peaks, _, n_locked = _histogram(tmp_path, 0.025)
    free_peaks, ratio, n_free = _histogram(tmp_path, 0.0)
    ok = peaks == 3 and ratio < 2 and n_free >= 10_000
    record(7, "phase histograms (Theta 3e-3, 20 bins)", ok,
           f"locked: {peaks} peaks from {n_locked} crossings (3); "
           f"free: max/min = {ratio:.2f} from {n_free} crossings (< 2)")


PROPERTY_TESTS = [
    "test_circle_map.py::test_lift_equivariance",
    "test_circle_map.py::test_removable_singularities_of_gain",
    "test_circle_map.py::test_removable_singularity_in_the_map",
    "test_analysis.py::test_histogram_normalisation",
    "test_analysis.py::test_parseval",
    "test_envelope.py::test_seed_determinism",
    "test_scans.py::test_scan_bit_identical_across_thread_counts",
    "test_cli.py::test_thread_count_does_not_change_results",
]


def test_8_property_suite():
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
         *[str(TESTS / t) for t in PROPERTY_TESTS]],
        cwd=TESTS.parent, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    record(8, "property suite", proc.returncode == 0,
           f"{len(PROPERTY_TESTS)} property tests: {summary}")
