"""Bit-packed Pauli-frame sampling for lowered instance circuits.

A frame is the Pauli error accumulated on each qubit, stored as X/Z bit
matrices of shape (qubit, words) with 64 shots per uint64 word. Frames
propagate through Clifford instructions by the conjugation action (signs
are irrelevant); a measurement record flips wherever the frame
anticommutes with the measured Pauli. Detector and observable bits are
XORs of their member record flips; no reference outcomes are needed
because the builders certify detectors deterministic modulo errors.

Randomness is drawn per 64-shot chunk from its own generator seeded by
(seed, chunk index), so any batch width yields prefix-consistent
streams and results are independent of how work is split.
"""

from __future__ import annotations

import time

import numpy as np

from .circuit import MEASUREMENT_OPS, RUS_OPS, referenced_records

CHUNK = 64  # shots per machine word


def _pack64(bits):
    """Pack a (..., 64) boolean array into (...,) uint64 (bit s = shot s)."""
    b = np.packbits(bits, axis=-1, bitorder="little")
    return b.view(np.uint64).reshape(bits.shape[:-1])


class _RandomPlan:
    """Per-chunk random error realizations, drawn in instruction order."""

    def __init__(self, seed, chunks):
        self.rngs = [np.random.default_rng([seed, c]) for c in range(chunks)]

    def bernoulli(self, p, rows):
        """(rows, chunks) uint64 of independent Bernoulli(p) bits."""
        cols = [
            _pack64(rng.random((rows, CHUNK)) < p) for rng in self.rngs
        ]
        return np.stack(cols, axis=-1)


class _ColumnPlan:
    """Deterministic one-mechanism-per-column injections (DEM extraction)."""

    def __init__(self, table, words):
        # table: (instr_index, draw_index) -> (rows, words) uint64
        self.table = table
        self.words = words
        self.draw = 0

    def bernoulli(self, p, rows):
        key = self.draw
        self.draw += 1
        got = self.table.get(key)
        if got is None:
            return np.zeros((rows, self.words), dtype=np.uint64)
        return got


def propagate(circuit, words, plan):
    """Run the frame engine; returns (record, detector, observable) flips.

    ``plan.bernoulli(p, rows)`` is called once per error instruction (three
    times for DPH2: activation, then one 1/2-bit per pair member) in
    instruction order; each call must return (rows, words) uint64 masks.
    """
    n = circuit.qubit_count
    x = np.zeros((n, words), dtype=np.uint64)
    z = np.zeros((n, words), dtype=np.uint64)
    records = []
    for inst in circuit.instructions:
        op = inst.opcode
        t = inst.targets
        if op in RUS_OPS:
            raise ValueError("frame sampling requires an Instance circuit")
        if op == "H":
            for q in t:
                x[q], z[q] = z[q].copy(), x[q].copy()
        elif op == "H_YZ":
            for q in t:
                x[q] ^= z[q]
        elif op in ("S", "S_DAG"):
            for q in t:
                z[q] ^= x[q]
        elif op == "CZ":
            for i in range(0, len(t), 2):
                a, b = t[i], t[i + 1]
                z[a] ^= x[b]
                z[b] ^= x[a]
        elif op in ("R", "RX"):
            for q in t:
                x[q] = 0
                z[q] = 0
        elif op == "M":
            for q in t:
                records.append(x[q].copy())
        elif op == "MX":
            for q in t:
                records.append(z[q].copy())
        elif op in ("MZZ", "MXX", "MYY"):
            for i in range(0, len(t), 2):
                a, b = t[i], t[i + 1]
                if op == "MZZ":
                    records.append(x[a] ^ x[b])
                elif op == "MXX":
                    records.append(z[a] ^ z[b])
                else:
                    records.append(x[a] ^ z[a] ^ x[b] ^ z[b])
        elif op in ("X_ERROR", "Y_ERROR", "Z_ERROR"):
            flips = plan.bernoulli(inst.args[0], len(t))
            for i, q in enumerate(t):
                if op != "Z_ERROR":
                    x[q] ^= flips[i]
                if op != "X_ERROR":
                    z[q] ^= flips[i]
        elif op == "DPH2":
            pairs = len(t) // 2
            act = plan.bernoulli(inst.args[0], pairs)
            b1 = plan.bernoulli(0.5, pairs)
            b2 = plan.bernoulli(0.5, pairs)
            for i in range(pairs):
                z[t[2 * i]] ^= act[i] & b1[i]
                z[t[2 * i + 1]] ^= act[i] & b2[i]
        # DETECTOR / OBSERVABLE_INCLUDE / TICK / SHIFT_COORDS: no frame action.

    detectors, observables = referenced_records(circuit)
    zero = np.zeros(words, dtype=np.uint64)
    det = np.stack([_xor_rows(records, d, zero) for d in detectors]) \
        if detectors else np.zeros((0, words), dtype=np.uint64)
    obs_keys = sorted(observables)
    obs = np.stack([_xor_rows(records, observables[k], zero) for k in obs_keys]) \
        if obs_keys else np.zeros((0, words), dtype=np.uint64)
    rec = np.stack(records) if records else np.zeros((0, words), dtype=np.uint64)
    return rec, det, obs


def _xor_rows(records, indices, zero):
    acc = zero.copy()
    for i in indices:
        acc ^= records[i]
    return acc


def sample(circuit, shots, seed, return_records=False):
    """Sample detector/observable flip bits for ``shots`` shots.

    Returns packed (rows, words) uint64 matrices (detectors, observables);
    bit s of word w is shot 64 * w + s. Shots beyond ``shots`` in the last
    word are drawn but should be ignored by consumers.
    """
    chunks = -(-shots // CHUNK)
    plan = _RandomPlan(seed, chunks)
    rec, det, obs = propagate(circuit, chunks, plan)
    if return_records:
        return det, obs, rec
    return det, obs


def unpack(packed, shots):
    """(rows, words) uint64 -> (rows, shots) uint8 of bits."""
    as_bytes = packed.astype("<u8").tobytes()
    arr = np.frombuffer(as_bytes, dtype=np.uint8).reshape(packed.shape[0], -1)
    bits = np.unpackbits(arr, axis=-1, bitorder="little")
    return bits[:, :shots]


def shot_rows(packed, shots):
    """Serialize packed flips as little-endian bit rows, one row per shot."""
    bits = unpack(packed, shots)  # (rows, shots)
    per_shot = np.packbits(bits.T, axis=-1, bitorder="little")
    return per_shot.tobytes()


def from_shot_rows(data, num_bits):
    """Inverse of shot_rows: bytes -> (rows=num_bits, words) packed uint64."""
    row_bytes = -(-num_bits // 8)
    shots = len(data) // row_bytes
    arr = np.frombuffer(data, dtype=np.uint8).reshape(shots, row_bytes)
    bits = np.unpackbits(arr, axis=-1, bitorder="little")[:, :num_bits]
    words = -(-shots // CHUNK)
    pad = words * CHUNK - shots
    cols = np.pad(bits.T, ((0, 0), (0, pad)))
    return _pack64(cols.reshape(num_bits, words, CHUNK))


def throughput_report(circuit, shots, seed=0):
    """Measure sampling throughput; returns shots per second."""
    start = time.perf_counter()
    sample(circuit, shots, seed)
    elapsed = time.perf_counter() - start
    return shots / elapsed if elapsed > 0 else float("inf")
