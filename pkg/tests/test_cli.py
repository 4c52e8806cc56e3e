"""Command-line tests: subcommand flows, exit codes, output schemas, and
reproducibility, driven in-process through main() plus one subprocess smoke
check of the installed entry point."""

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from kapsm import (
    EngineConfig,
    KernelParams,
    batch_detect,
    demodulate_hard,
    load_iq,
    load_model,
    load_symbols,
    modulate,
    save_iq,
    save_symbols,
)
from kapsm.cli import SUMMARY_COLUMNS, TRIAL_COLUMNS, main

FAST_SIM = """
[channel]
users = 1
noise_var = 0.0

[frame]
n_train = 40
n_data = 80

[sweep]
schemes = BPSK
antennas = 2
seeds = 0, 1
"""

FAST_BENCH = """
[bench]
dict_sizes = 64
batch_sizes = 32
antennas = 4
repeats = 5
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSimulate:
    def test_noiseless_single_user_bers_are_zero(self, tmp_path):
        cfg = write(tmp_path, "run.ini", FAST_SIM)
        out = tmp_path / "trials.csv"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out)
        assert [tuple(r.keys()) for r in rows] == [TRIAL_COLUMNS] * 2
        assert [r["seed"] for r in rows] == ["0", "1"]
        assert all(r["ber"] == "0.0" for r in rows)
        assert all(r["scheme"] == "BPSK" for r in rows)
        assert all(r["K"] == "1" and r["M"] == "2" for r in rows)
        assert all(float(r["detect_us"]) > 0 for r in rows)
        summary = read_rows(str(out) + ".summary.csv")
        assert tuple(summary[0].keys()) == SUMMARY_COLUMNS
        assert summary[0]["ber_mean"] == "0.0"
        assert summary[0]["seeds"] == "2"

    def test_reproducible_except_wall_clock(self, tmp_path):
        cfg = write(tmp_path, "run.ini", FAST_SIM)
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
            rows = read_rows(out)
            outputs.append([
                {k: v for k, v in row.items() if k != "detect_us"} for row in rows
            ])
        assert outputs[0] == outputs[1]

    def test_stdout_default(self, tmp_path, capsys):
        cfg = write(tmp_path, "run.ini", FAST_SIM)
        assert main(["simulate", "--config", cfg]) == 0
        captured = capsys.readouterr()
        assert captured.out.splitlines()[0] == ",".join(TRIAL_COLUMNS)
        assert captured.err.splitlines()[0] == ",".join(SUMMARY_COLUMNS)

    def test_json_bundles_trials_and_summary(self, tmp_path, capsys):
        cfg = write(tmp_path, "run.ini", FAST_SIM)
        assert main(["simulate", "--config", cfg, "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert set(doc) == {"trials", "summary"}
        assert len(doc["trials"]) == 2
        assert doc["trials"][0]["ber"] == 0.0
        assert doc["summary"][0]["seeds"] == 2

    def test_seed_override_restricts_run(self, tmp_path):
        cfg = write(tmp_path, "run.ini", FAST_SIM)
        out = tmp_path / "one.csv"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", "1"]) == 0
        rows = read_rows(out)
        assert [r["seed"] for r in rows] == ["1"]

    def test_unknown_config_key_is_exit_2(self, tmp_path, capsys):
        cfg = write(tmp_path, "run.ini", "[kernel]\nsigma = 0.1\n")
        assert main(["simulate", "--config", cfg]) == 2
        assert "sigma" in capsys.readouterr().err

    def test_missing_config_is_exit_2(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == 2

    def test_usage_error_is_exit_2(self):
        assert main(["simulate"]) == 2


class TestBench:
    def test_csv_rows_for_ladder(self, tmp_path):
        cfg = write(tmp_path, "run.ini", FAST_BENCH)
        out = tmp_path / "bench.csv"
        assert main(["bench", "--config", cfg, "--out", str(out)]) == 0
        rows = read_rows(out)
        assert [r["stage"] for r in rows] == ["baseline", "grouped", "tiled", "balanced"]
        assert len({r["checksum"] for r in rows}) == 1
        assert all(r["ok"] == "true" for r in rows)

    def test_json_matches_csv_values(self, tmp_path, capsys):
        cfg = write(tmp_path, "run.ini", FAST_BENCH)
        assert main(["bench", "--config", cfg, "--json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert [r["stage"] for r in doc["rows"]] == list(("baseline", "grouped", "tiled", "balanced"))
        assert all(r["ok"] for r in doc["rows"])

    def test_checksum_failure_is_exit_1(self, tmp_path, capsys, monkeypatch):
        import kapsm.cli as cli_mod

        real = cli_mod.bench_detection

        def sabotaged(*args, **kwargs):
            kwargs["corrupt_stage"] = "balanced"
            return real(*args, **kwargs)

        monkeypatch.setattr(cli_mod, "bench_detection", sabotaged)
        cfg = write(tmp_path, "run.ini", FAST_BENCH)
        assert main(["bench", "--config", cfg, "--out", str(tmp_path / "r.csv")]) == 1
        assert "balanced" in capsys.readouterr().err

    def test_workers_override(self, tmp_path):
        cfg = write(tmp_path, "run.ini", FAST_BENCH)
        out = tmp_path / "w2.csv"
        assert main(["bench", "--config", cfg, "--out", str(out), "--workers", "2"]) == 0
        assert all(r["workers"] == "2" for r in read_rows(out))


class TestTrainDetect:
    def make_capture(self, tmp_path, n_pilots=60, n_data=100, antennas=3, seed=9):
        """Synthesize a single-user noiseless capture and write the files."""
        rng = np.random.default_rng(seed)
        h = rng.standard_normal(antennas) + 1j * rng.standard_normal(antennas)
        bits = rng.integers(0, 2, 2 * (n_pilots + n_data))
        symbols = modulate(bits, "QPSK")
        rx = symbols[:, None] * h[None, :]
        iq_path = tmp_path / "capture.iq"
        pilots_path = tmp_path / "pilots.bin"
        save_iq(iq_path, rx)
        save_symbols(pilots_path, symbols[:n_pilots])
        return str(iq_path), str(pilots_path)

    def test_train_then_detect_flow(self, tmp_path, capsys):
        iq, pilots = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "")
        model = tmp_path / "f.mdl"
        out = tmp_path / "est.bin"
        assert main(["train", "--config", cfg, "--iq", iq, "--pilots", pilots,
                     "--out", str(model)]) == 0
        assert "trained" in capsys.readouterr().err
        assert main(["detect", str(model), iq, str(out)]) == 0

        # File-based detection must agree bitwise with the in-process path
        # run at the same (f32 output) precision.
        f, params = load_model(model)
        rx = load_iq(iq)
        expected = batch_detect(f, rx, params, EngineConfig())
        expected32 = (expected.real.astype(np.float32).astype(np.float64)
                      + 1j * expected.imag.astype(np.float32).astype(np.float64))
        got = load_symbols(out)
        assert np.array_equal(got, expected32)

    def test_trained_model_recovers_pilot_symbols(self, tmp_path):
        iq, pilots = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "")
        model = tmp_path / "f.mdl"
        out = tmp_path / "est.bin"
        main(["train", "--config", cfg, "--iq", iq, "--pilots", pilots, "--out", str(model)])
        main(["detect", str(model), iq, str(out)])
        est = load_symbols(out)
        sent = load_symbols(pilots)
        # Hard decisions on the training segment match the pilots.
        assert np.array_equal(
            demodulate_hard(est[: sent.size], "QPSK"), demodulate_hard(sent, "QPSK")
        )

    def test_detect_empty_iq_gives_empty_output(self, tmp_path):
        iq, pilots = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "")
        model = tmp_path / "f.mdl"
        main(["train", "--config", cfg, "--iq", iq, "--pilots", pilots, "--out", str(model)])
        empty_iq = tmp_path / "empty.iq"
        save_iq(empty_iq, np.zeros((0, 3), dtype=complex))
        out = tmp_path / "none.bin"
        assert main(["detect", str(model), str(empty_iq), str(out)]) == 0
        assert load_symbols(out).size == 0

    def test_detect_antenna_mismatch_is_exit_2(self, tmp_path, capsys):
        iq, pilots = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "")
        model = tmp_path / "f.mdl"
        main(["train", "--config", cfg, "--iq", iq, "--pilots", pilots, "--out", str(model)])
        wide_iq = tmp_path / "wide.iq"
        save_iq(wide_iq, np.zeros((4, 5), dtype=complex))
        assert main(["detect", str(model), str(wide_iq), str(tmp_path / "o.bin")]) == 2
        assert "antennas" in capsys.readouterr().err

    def test_detect_truncated_iq_is_exit_2_with_offset(self, tmp_path, capsys):
        iq, pilots = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "")
        model = tmp_path / "f.mdl"
        main(["train", "--config", cfg, "--iq", iq, "--pilots", pilots, "--out", str(model)])
        cut = tmp_path / "cut.iq"
        cut.write_bytes(open(iq, "rb").read()[:-3])
        assert main(["detect", str(model), str(cut), str(tmp_path / "o.bin")]) == 2
        assert "offset" in capsys.readouterr().err

    def test_train_rejects_empty_pilots(self, tmp_path, capsys):
        iq, _ = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "")
        empty = tmp_path / "none.bin"
        save_symbols(empty, np.zeros(0, dtype=complex))
        assert main(["train", "--config", cfg, "--iq", iq, "--pilots", str(empty),
                     "--out", str(tmp_path / "f.mdl")]) == 2
        assert "empty" in capsys.readouterr().err

    def test_train_rejects_oversized_pilots(self, tmp_path, capsys):
        iq, _ = self.make_capture(tmp_path, n_pilots=5, n_data=0)
        cfg = write(tmp_path, "run.ini", "")
        many = tmp_path / "many.bin"
        save_symbols(many, np.ones(50, dtype=complex))
        assert main(["train", "--config", cfg, "--iq", iq, "--pilots", str(many),
                     "--out", str(tmp_path / "f.mdl")]) == 2
        assert "exceed" in capsys.readouterr().err

    def test_model_params_roundtrip_from_config(self, tmp_path):
        iq, pilots = self.make_capture(tmp_path)
        cfg = write(tmp_path, "run.ini", "[kernel]\nw_l = 0.25\nw_g = 0.75\nsigma_sq = 0.1\n")
        model = tmp_path / "f.mdl"
        main(["train", "--config", cfg, "--iq", iq, "--pilots", pilots, "--out", str(model)])
        _, params = load_model(model)
        assert params == KernelParams(0.25, 0.75, 0.1)


class TestEntryPoint:
    def test_help_exits_zero(self):
        assert main(["--help"]) == 0

    def test_installed_script_smoke(self, tmp_path):
        cfg = write(tmp_path, "run.ini", FAST_SIM)
        proc = subprocess.run(
            [sys.executable, "-m", "kapsm", "simulate", "--config", cfg],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.splitlines()[0] == ",".join(TRIAL_COLUMNS)
