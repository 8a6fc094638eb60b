import math
import numpy as np
import pytest

from seolock import cli
from seolock.cli import read_csv


def run(tmp_path, command, config_text=None, *extra):
    argv = [command, "--out", str(tmp_path / "out"), "--no-timestamp", *extra]
    if config_text is not None:
        tmp_path.mkdir(parents=True, exist_ok=True)
        cfg = tmp_path / "run.ini"
        cfg.write_text(config_text)
        argv += ["--config", str(cfg)]
    return cli.main(argv)


def output(tmp_path, name):
    return read_csv(tmp_path / "out" / name)


# ---- configuration errors --------------------------------------------------

def test_malformed_config_exits_2(tmp_path):
    assert run(tmp_path, "orbit", "this is not [an ini file\n") == 2


def test_unknown_key_exits_2(tmp_path, capsys):
    assert run(tmp_path, "orbit", "[map]\nalhpa = 0.3\n") == 2
    assert "alhpa" in capsys.readouterr().err


def test_unknown_section_exits_2(tmp_path):
    assert run(tmp_path, "orbit", "[mapp]\nalpha = 0.3\n") == 2


def test_bad_value_exits_2(tmp_path):
    assert run(tmp_path, "orbit", "[map]\nalpha = 1.5\n") == 2
    assert run(tmp_path, "orbit", "[map]\nn_iter = ten\n") == 2


def test_argument_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["no-such-command"])
    assert info.value.code == 2
    assert cli.main(["orbit", "--threads", "-1", "--out", str(tmp_path)]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert cli.main(["orbit", "--config", str(tmp_path / "absent.ini"),
                     "--out", str(tmp_path)]) == 2


# ---- reproducibility -------------------------------------------------------

def rerun_bytes(tmp_path, command, cfg, name, *extra):
    """Output of two runs with the same paths (the paths are part of the metadata)."""
    out = []
    for flags in extra or ((), ()):
        assert run(tmp_path, command, cfg, *flags) == 0
        out.append((tmp_path / "out" / name).read_bytes())
    return out


def test_reruns_are_byte_identical(tmp_path):
    cfg = "[scan]\nn_alpha = 200\n[map]\nn_avg = 5000\n"
    a, b = rerun_bytes(tmp_path, "staircase", cfg, "staircase.csv")
    assert a == b


def test_timestamp_is_the_only_difference(tmp_path):
    cfg = "[map]\nn_iter = 20\n"
    assert run(tmp_path, "orbit", cfg) == 0
    a = (tmp_path / "out" / "orbit.csv").read_text().splitlines()
    assert cli.main(["orbit", "--out", str(tmp_path / "out"), "--config",
                     str(tmp_path / "run.ini")]) == 0
    b = (tmp_path / "out" / "orbit.csv").read_text().splitlines()
    diff = [line for line in b if line not in a]
    assert len(diff) == 1 and diff[0].startswith("# generated = ")


def test_thread_count_does_not_change_results(tmp_path):
    cfg = ("[scan]\nalpha_min = 0.45\nalpha_max = 0.55\nn_alpha = 41\nbeta_max = 0.03\n"
           "n_beta = 4\n[map]\nn_avg = 5000\n")
    one, many = rerun_bytes(tmp_path, "tongue", cfg, "tongue.csv",
                            ("--threads", "1"), ("--threads", "4"))
    assert one == many


def test_noise_seed_override(tmp_path):
    cfg = "[noise]\nTheta = 1e-3\n[integration]\nn_periods = 5\nstride = 50\n"
    assert run(tmp_path / "a", "envelope", cfg, "--seed", "1") == 0
    assert run(tmp_path / "b", "envelope", cfg, "--seed", "2") == 0
    meta, _, rows_a = output(tmp_path / "a", "envelope.csv")
    _, _, rows_b = output(tmp_path / "b", "envelope.csv")
    assert meta["noise.seed"] == "1"
    assert rows_a != rows_b


# ---- outputs ---------------------------------------------------------------

def test_float_cells_round_trip(tmp_path):
    assert run(tmp_path, "orbit", "[map]\nn_iter = 10\n") == 0
    meta, header, rows = output(tmp_path, "orbit.csv")
    assert header == ["n", "q_lifted", "q_wrapped"]
    assert len(rows) == 11
    assert float(meta["map.alpha"]) == 1 / 3
    assert float(rows[0][1]) == 0.0


def test_cycle_of_rectangular_modulation(tmp_path):
    assert run(tmp_path, "cycle") == 0
    meta, header, rows = output(tmp_path, "cycle.csv")
    assert header == ["index", "q", "f_q"]
    assert len(rows) == 3
    assert meta["derived.period"] == "3" and meta["derived.rotation"] == "1"
    assert meta["derived.stable"] == "True"


def test_no_cycle_gives_empty_table(tmp_path):
    assert run(tmp_path, "cycle", "[map]\nalpha = 0.4142135623730951\nbeta_f = 0.0\n") == 0
    meta, _, rows = output(tmp_path, "cycle.csv")
    assert rows == [] and meta["derived.cycle"] == "none"


def test_tongue_single_row_and_analytic_column(tmp_path):
    cfg = ("[scan]\nalpha_min = 0.4\nalpha_max = 0.6\nn_alpha = 21\nbeta_min = 0.02\n"
           "beta_max = 0.02\nn_beta = 1\n[map]\nn_avg = 5000\n")
    assert run(tmp_path, "tongue", cfg) == 0
    _, header, rows = output(tmp_path, "tongue.csv")
    assert header == ["alpha", "beta_f", "W", "dW_dalpha", "analytic_boundary_flag"]
    assert len(rows) == 21
    assert {r[1] for r in rows} == {"0.02"}
    flags = {round(float(r[0]), 6): r[4] for r in rows}
    assert flags[0.5] == "1" and flags[0.4] == "0"


def test_staircase_labels_plateaus(tmp_path):
    assert run(tmp_path, "staircase", "[map]\nn_avg = 20000\n") == 0
    meta, _, rows = output(tmp_path, "staircase.csv")
    labels = {r[2] for r in rows} - {""}
    assert len(labels) >= 11
    assert int(meta["derived.n_plateaus"]) >= 11


def test_rigid_rotation_staircase_has_no_labels(tmp_path):
    assert run(tmp_path, "staircase", "[map]\nbeta_f = 0.0\nn_avg = 5000\n"
                                      "[scan]\nn_alpha = 300\n") == 0
    _, _, rows = output(tmp_path, "staircase.csv")
    assert all(r[2] == "" for r in rows)


def test_histogram_three_peaks(tmp_path):
    assert run(tmp_path, "histogram") == 0
    meta, header, rows = output(tmp_path, "histogram.csv")
    assert header == ["bin_lo", "bin_hi", "density"]
    assert len(rows) == 20
    assert meta["derived.n_peaks"] == "3"
    widths = np.array([float(r[1]) - float(r[0]) for r in rows])
    dens = np.array([float(r[2]) for r in rows])
    assert float(np.sum(widths * dens)) == pytest.approx(1.0, abs=1e-9)


def test_envelope_output_shape(tmp_path):
    cfg = "[noise]\nensemble = 2\nTheta = 1e-3\n[integration]\nn_periods = 2\n"
    assert run(tmp_path, "envelope", cfg) == 0
    _, header, rows = output(tmp_path, "envelope.csv")
    assert header == ["member", "t", "A_re", "A_im", "abs_A"]
    assert {r[0] for r in rows} == {"0", "1"}
    r = rows[0]
    assert float(r[4]) == pytest.approx(math.hypot(float(r[2]), float(r[3])))


def test_full_model_runs_at_physical_level(tmp_path):
    assert run(tmp_path, "full", "[integration]\nn_periods = 20\n") == 0
    _, header, rows = output(tmp_path, "full.csv")
    assert header == ["t", "x", "T_R"]
    assert len(rows) > 100


def test_full_model_needs_physical_level(tmp_path):
    assert run(tmp_path, "full", "[run]\nlevel = map\n") == 2


def test_verify_map_at_weak_modulation_passes(tmp_path):
    assert run(tmp_path, "verify-map", "[map]\nbeta_f = 0.0025\n") == 0
    meta, _, rows = output(tmp_path, "verify_map.csv")
    assert len(rows) == 101
    assert meta["derived.passed"] == "True"


def test_verify_map_default_amplitude(tmp_path):
    """At the default beta_f = 0.01 the map should track the envelope to 1e-2.

    The second-order drift of the one-period map reaches about 0.13 over
    100 periods here, so the command reports a verification failure.
    """
    assert run(tmp_path, "verify-map") == 0


def test_verify_map_failure_exit_code(tmp_path):
    assert run(tmp_path, "verify-map", "[map]\nbeta_f = 0.02\n") == 3
    meta, _, _ = output(tmp_path, "verify_map.csv")
    assert meta["derived.passed"] == "False"


def test_blow_up_exit_code(tmp_path, capsys):
    assert run(tmp_path, "envelope", "[integration]\namplitude0 = 1000\nn_periods = 5\n") == 4
    assert "blow-up" in capsys.readouterr().err
