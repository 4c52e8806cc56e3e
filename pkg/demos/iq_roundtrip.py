"""File-based workflow: record, train, detect.

Synthesizes a two-user uplink frame, writes it to the binary IQ container,
then drives the command-line interface end to end:

  kapsm train   --iq capture.iq --pilots pilots.bin --out filter.mdl
  kapsm detect  filter.mdl capture.iq estimates.bin

and finally compares the demodulated bits with what was transmitted.

Run:  python demos/iq_roundtrip.py
"""

import tempfile
from pathlib import Path

import numpy as np

from kapsm import (
    ChannelModel,
    ber,
    demodulate_hard,
    load_symbols,
    modulate,
    save_iq,
    save_symbols,
    synthesize_received,
)
from kapsm.cli import main

rng = np.random.default_rng(21)
K, M, N_TRAIN, N_DATA = 2, 8, 200, 800
h = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2)
ch = ChannelModel(K, M, h, np.ones(K), noise_var=0.02)

bits = rng.integers(0, 2, (K, 2 * (N_TRAIN + N_DATA)))
symbols = np.stack([modulate(b, "QPSK") for b in bits])
rx = synthesize_received(symbols, ch, rng)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "run.ini").write_text("[apsm]\nepsilon = 0.05\n")
    save_iq(tmp / "capture.iq", rx)
    save_symbols(tmp / "pilots.bin", symbols[0, :N_TRAIN])  # user 0's pilots

    code = main(["train", "--config", str(tmp / "run.ini"),
                 "--iq", str(tmp / "capture.iq"),
                 "--pilots", str(tmp / "pilots.bin"),
                 "--out", str(tmp / "filter.mdl")])
    print(f"train exit code: {code}")

    code = main(["detect", str(tmp / "filter.mdl"),
                 str(tmp / "capture.iq"), str(tmp / "estimates.bin")])
    print(f"detect exit code: {code}")

    estimates = load_symbols(tmp / "estimates.bin")

data_bits = bits[0, 2 * N_TRAIN:]
decided = demodulate_hard(estimates[N_TRAIN:], "QPSK")
print(f"\nuser 0 data-segment BER: {ber(data_bits, decided):.2e} "
      f"({N_DATA} symbols, {2 * N_DATA} bits)")
print(f"file sizes: capture.iq holds {rx.shape[0]} samples x {M} antennas "
      f"as float32 I/Q pairs")
