"""Regenerate hardware_sigma_pi6.csv: a synthetic 500-shot record with the
published acceptance counts (356 physical events, 306 of them ancilla 1).

Run from the repository root: python3 tests/fixtures/make_hardware_fixture.py
"""

import math
from pathlib import Path

import numpy as np

from lgtwave.ansatz import WavePacketSpec, build_cmn, optimize_all
from lgtwave.circuit import vqe_ground_state, wp_circuit
from lgtwave.model import Group, LatticeSpec
from lgtwave.simulate import ShotRecord, classify_events, run, sample

SEED = 2024
spec = LatticeSpec(Group.Z2, 6, 1.0, -0.3)
gs, _ = vqe_ground_state(spec)
table = build_cmn(spec, WavePacketSpec(math.pi / 6, 3.0, 0.0), optimize_all(spec))
state = run(wp_circuit(spec, table, 1, 0.1, gs=gs))
pool = sample(state, 20_000, SEED)
labels, anc = classify_events(spec, pool)
bits = np.array(pool.bitstrings)
a1 = list(bits[(labels >= 0) & (anc == 1)][:306])
a0 = list(bits[(labels >= 0) & (anc == 0)][:50])
rng = np.random.default_rng(SEED)
bad = []
for b in bits[(labels >= 0)][306:306 + 144]:
    q = 2 * int(rng.integers(0, 6)) + 1  # flip one link bit: breaks Gauss's law at two sites
    bad.append(b[:q] + ("1" if b[q] == "0" else "0") + b[q + 1:])
shots = a1 + a0 + bad
order = rng.permutation(len(shots))
rec = ShotRecord(tuple(shots[i] for i in order), SEED, pool.n_qubits)
out = Path(__file__).with_name("hardware_sigma_pi6.csv")
out.write_text("# synthetic stand-in for a 500-shot hardware record; counts match the published run\n"
               + rec.to_csv())
