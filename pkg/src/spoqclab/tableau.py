"""Reference stabilizer simulator with exact phase tracking.

The simulator represents the state by 2n Pauli rows (n destabilizers then
n stabilizers).  Each row is stored as X/Z bit vectors plus a phase
exponent r mod 4, so that the operator is ``i^r * prod_j X^x_j Z^z_j``.
Row products then need no lookup tables:

    (i^r1 X^a Z^b)(i^r2 X^c Z^d) = i^(r1+r2) (-1)^(b.c) X^(a^c) Z^(b^d)

Measurement outcomes use the convention bit = (1 - eigenvalue) / 2.

The simulator runs in two modes.  In concrete mode, random measurement
outcomes are drawn from a seeded generator.  In symbolic mode, each random
outcome allocates a fresh "coin" and every outcome is reported as an
affine form over coins; a measurement is deterministic iff its linear part
vanishes.  Symbolic runs drive detector discovery and observable
derivation in :mod:`spoqclab.codes`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import MEASUREMENT_OPS, RUS_OPS


_PAULI_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_SIGN_R4 = {1: 0, 1j: 1, -1: 2, -1j: 3}


@dataclass(frozen=True)
class PauliString:
    """A signed Pauli operator as packed X/Z masks.

    ``sign`` is one of +1, -1, +1j, -1j.  Internally a Y on qubit j is the
    pair (x_j, z_j) = (1, 1) together with one factor of i in the phase.
    """

    x: tuple
    z: tuple
    sign: complex = 1

    @classmethod
    def from_label(cls, label, sign=1):
        """Build from a string such as ``"XXIZ"`` or per-qubit dict."""
        x = []
        z = []
        for ch in label:
            bx, bz = _PAULI_BITS[ch]
            x.append(bx)
            z.append(bz)
        return cls(tuple(x), tuple(z), sign)

    @classmethod
    def from_sparse(cls, n, terms, sign=1):
        """``terms`` maps qubit index to one of 'X', 'Y', 'Z'."""
        x = [0] * n
        z = [0] * n
        for q, p in terms.items():
            x[q], z[q] = _PAULI_BITS[p]
        return cls(tuple(x), tuple(z), sign)

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("mask lengths differ")
        if self.sign not in _SIGN_R4:
            raise ValueError(f"sign must be a fourth root of unity, got {self.sign}")

    @property
    def n(self):
        return len(self.x)

    @property
    def r4(self):
        """Phase exponent of i in the X^x Z^z convention."""
        y_count = sum(a & b for a, b in zip(self.x, self.z))
        return (_SIGN_R4[self.sign] + y_count) % 4

    def commutes(self, other):
        t = sum((a & d) ^ (b & c) for a, b, c, d in zip(self.x, self.z, other.x, other.z))
        return t % 2 == 0

    def __mul__(self, other):
        if self.n != other.n:
            raise ValueError("length mismatch")
        r = (self.r4 + other.r4 + 2 * sum(b & c for b, c in zip(self.z, other.x))) % 4
        x = tuple(a ^ c for a, c in zip(self.x, other.x))
        z = tuple(b ^ d for b, d in zip(self.z, other.z))
        y_count = sum(a & b for a, b in zip(x, z))
        sign = {0: 1, 1: 1j, 2: -1, 3: -1j}[(r - y_count) % 4]
        return PauliString(x, z, sign)

    def label(self):
        return "".join("IXZY"[a + 2 * b] for a, b in zip(self.x, self.z))


@dataclass(frozen=True)
class Affine:
    """A GF(2) affine form c + <mask, coins> over symbolic coin bits."""

    const: int
    mask: int = 0

    @property
    def deterministic(self):
        return self.mask == 0

    def __xor__(self, other):
        return Affine(self.const ^ other.const, self.mask ^ other.mask)


@dataclass
class RunResult:
    measurements: list          # outcome bits (concrete) in record order
    deterministic: list         # bool per measurement
    forms: list                 # Affine per measurement (symbolic mode only)
    detectors: list             # parity bit per DETECTOR, in order
    observables: dict           # observable index -> parity bit


class TableauSimulator:
    """Stabilizer state on n qubits with optional symbolic outcomes."""

    def __init__(self, n, rng=None, symbolic=False):
        self.n = n
        self.symbolic = symbolic
        self.rng = rng if rng is not None else np.random.default_rng(0)
        # Rows 0..n-1 destabilizers (X_j), rows n..2n-1 stabilizers (Z_j).
        self.X = np.zeros((2 * n, n), dtype=np.uint8)
        self.Z = np.zeros((2 * n, n), dtype=np.uint8)
        for j in range(n):
            self.X[j, j] = 1
            self.Z[n + j, j] = 1
        self.r4 = np.zeros(2 * n, dtype=np.int64)
        self.rlin = [0] * (2 * n)
        self.num_coins = 0

    # -- gates ---------------------------------------------------------

    def h(self, q):
        xq = self.X[:, q].copy()
        zq = self.Z[:, q].copy()
        self.r4 += 2 * (xq & zq)
        self.X[:, q] = zq
        self.Z[:, q] = xq

    def s(self, q):
        xq = self.X[:, q]
        self.r4 += xq
        self.Z[:, q] ^= xq

    def s_dag(self, q):
        xq = self.X[:, q]
        self.r4 -= xq
        self.Z[:, q] ^= xq

    def h_yz(self, q):
        xq = self.X[:, q].copy()
        zq = self.Z[:, q]
        self.r4 += 2 * xq + zq
        self.X[:, q] = xq ^ zq

    def cz(self, a, b):
        xa = self.X[:, a]
        xb = self.X[:, b]
        self.r4 += 2 * (xa & xb)
        self.Z[:, a] ^= xb
        self.Z[:, b] ^= xa

    def apply_pauli(self, pauli, cond=None):
        """Conjugate the state by a Pauli unitary.

        ``cond`` optionally makes the application conditional on an Affine
        form (used for reset corrections in symbolic mode).
        """
        px = np.asarray(pauli.x, dtype=np.uint8)
        pz = np.asarray(pauli.z, dtype=np.uint8)
        anti = ((self.X @ pz) + (self.Z @ px)) % 2
        rows = np.nonzero(anti)[0]
        if cond is None:
            self.r4[rows] += 2
        else:
            self.r4[rows] += 2 * cond.const
            if cond.mask:
                for h in rows:
                    self.rlin[h] ^= cond.mask
        return rows

    # -- row algebra ---------------------------------------------------

    def _mul_rows(self, rows, i):
        """rows[h] <- rows[h] * row[i] for each h in rows."""
        if len(rows) == 0:
            return
        cross = (self.Z[rows] @ self.X[i]).astype(np.int64)
        self.r4[rows] += self.r4[i] + 2 * cross
        self.X[rows] ^= self.X[i]
        self.Z[rows] ^= self.Z[i]
        m = self.rlin[i]
        if m:
            for h in rows:
                self.rlin[h] ^= m
        elif self.symbolic:
            pass

    # -- measurement ---------------------------------------------------

    def measure_pauli(self, pauli):
        """Measure a Hermitian Pauli. Returns (outcome, deterministic, form).

        In concrete mode ``outcome`` is a bit and ``form`` is an Affine
        with that constant; in symbolic mode the outcome bit equals the
        form's constant and is only meaningful when deterministic.
        """
        if pauli.sign not in (1, -1):
            raise ValueError("measured Pauli must be Hermitian (sign +-1)")
        px = np.asarray(pauli.x, dtype=np.uint8)
        pz = np.asarray(pauli.z, dtype=np.uint8)
        target_r4 = pauli.r4
        anti = ((self.X @ pz) + (self.Z @ px)) % 2
        stab_anti = np.nonzero(anti[self.n:])[0]
        if len(stab_anti):
            p = self.n + stab_anti[0]
            rows = np.nonzero(anti)[0]
            rows = rows[rows != p]
            self._mul_rows(rows, p)
            # Old stabilizer p becomes the destabilizer paired with P.
            d = p - self.n
            self.X[d] = self.X[p]
            self.Z[d] = self.Z[p]
            self.r4[d] = self.r4[p]
            self.rlin[d] = self.rlin[p]
            self.X[p] = px
            self.Z[p] = pz
            if self.symbolic:
                coin = self.num_coins
                self.num_coins += 1
                self.r4[p] = target_r4
                self.rlin[p] = 1 << coin
                return 0, False, Affine(0, 1 << coin)
            outcome = int(self.rng.integers(2))
            self.r4[p] = (target_r4 + 2 * outcome) % 4
            self.rlin[p] = 0
            return outcome, False, Affine(outcome)
        # Deterministic: accumulate product of stabilizers whose
        # destabilizer partners anticommute with P.
        idx = np.nonzero(anti[: self.n])[0]
        acc_x = np.zeros(self.n, dtype=np.uint8)
        acc_z = np.zeros(self.n, dtype=np.uint8)
        acc_r4 = 0
        acc_lin = 0
        for j in idx:
            i = self.n + j
            acc_r4 += self.r4[i] + 2 * int(acc_z @ self.X[i])
            acc_x ^= self.X[i]
            acc_z ^= self.Z[i]
            acc_lin ^= self.rlin[i]
        if not (np.array_equal(acc_x, px) and np.array_equal(acc_z, pz)):
            raise AssertionError("deterministic measurement accumulator mismatch")
        rel = (int(acc_r4) - target_r4) % 4
        if rel % 2:
            raise AssertionError("non-real relative phase in measurement")
        outcome = rel // 2
        return outcome, True, Affine(outcome, acc_lin)

    def _measure_correct(self, q, basis):
        """Measure qubit q in Z or X and flip it back to the +1 state."""
        if basis == "Z":
            pauli = PauliString.from_sparse(self.n, {q: "Z"})
            corr = PauliString.from_sparse(self.n, {q: "X"})
        else:
            pauli = PauliString.from_sparse(self.n, {q: "X"})
            corr = PauliString.from_sparse(self.n, {q: "Z"})
        outcome, det, form = self.measure_pauli(pauli)
        if self.symbolic:
            if form.const or form.mask:
                self.apply_pauli(corr, cond=form)
        elif outcome:
            self.apply_pauli(corr)
        return outcome

    def reset_z(self, q):
        self._measure_correct(q, "Z")

    def reset_x(self, q):
        self._measure_correct(q, "X")

    # -- invariants ----------------------------------------------------

    def check_invariants(self):
        """Verify commutation structure; raises AssertionError on failure."""
        sp = (self.X @ self.Z.T + self.Z @ self.X.T) % 2
        n = self.n
        expect = np.zeros((2 * n, 2 * n), dtype=np.uint8)
        for j in range(n):
            expect[j, n + j] = expect[n + j, j] = 1
        if not np.array_equal(sp, expect):
            raise AssertionError("tableau commutation structure broken")
        if np.any((self.r4 % 4) % 2 != (self.X & self.Z).sum(axis=1) % 2):
            raise AssertionError("non-Hermitian row phase")


def deterministic_parity_basis(forms):
    """GF(2) basis of record subsets whose parity is coin-independent.

    ``forms`` are the per-record Affine forms of a symbolic run. Returns a
    list of record-set bitmasks (bit r = record r); every deterministic
    record parity is a XOR of basis elements. Each basis element is found
    the first time a record's coin mask becomes linearly dependent on the
    masks of earlier records, so elements are echelon-ordered by their
    highest record index.
    """
    pivots = {}
    basis = []
    for r, form in enumerate(forms):
        m = form.mask
        combo = 1 << r
        while m:
            piv = m.bit_length() - 1
            if piv not in pivots:
                break
            pm, pc = pivots[piv]
            m ^= pm
            combo ^= pc
        if m:
            pivots[m.bit_length() - 1] = (m, combo)
        else:
            basis.append(combo)
    return basis


_MEAS_BASIS = {"M": "Z", "MX": "X", "MZZ": "Z", "MXX": "X", "MYY": "Y"}


def _instruction_paulis(inst, n):
    """Yield the Pauli measured for each record of a measurement op."""
    op = inst.opcode
    if op in ("M", "MX"):
        for q in inst.targets:
            yield PauliString.from_sparse(n, {q: _MEAS_BASIS[op]})
    else:
        basis = _MEAS_BASIS[op]
        for i in range(0, len(inst.targets), 2):
            a, b = inst.targets[i], inst.targets[i + 1]
            yield PauliString.from_sparse(n, {a: basis, b: basis})


def run(circuit, seed=0, symbolic=False, check=False):
    """Execute an Instance circuit on the tableau simulator.

    Error instructions are sampled with the seeded generator; in symbolic
    mode only probability-0/1 error instructions are allowed.
    Returns a :class:`RunResult`.
    """
    rng = np.random.default_rng(seed)
    n = circuit.qubit_count
    sim = TableauSimulator(n, rng=rng, symbolic=symbolic)
    measurements = []
    det_flags = []
    forms = []
    detectors = []
    observables = {}

    def record_parity(targets):
        form = Affine(0)
        for t in targets:
            form = form ^ forms[len(forms) + t]
        return form

    for inst in circuit.instructions:
        op = inst.opcode
        if op in RUS_OPS:
            raise ValueError("tableau.run requires an Instance circuit (no RUS ops)")
        if op == "R":
            for q in inst.targets:
                sim.reset_z(q)
        elif op == "RX":
            for q in inst.targets:
                sim.reset_x(q)
        elif op == "H":
            for q in inst.targets:
                sim.h(q)
        elif op == "H_YZ":
            for q in inst.targets:
                sim.h_yz(q)
        elif op == "S":
            for q in inst.targets:
                sim.s(q)
        elif op == "S_DAG":
            for q in inst.targets:
                sim.s_dag(q)
        elif op == "CZ":
            for i in range(0, len(inst.targets), 2):
                sim.cz(inst.targets[i], inst.targets[i + 1])
        elif op in MEASUREMENT_OPS:
            for pauli in _instruction_paulis(inst, n):
                outcome, det, form = sim.measure_pauli(pauli)
                measurements.append(form.const if symbolic else outcome)
                det_flags.append(det)
                forms.append(form)
        elif op in ("X_ERROR", "Y_ERROR", "Z_ERROR"):
            p = inst.args[0]
            basis = op[0]
            for q in inst.targets:
                if symbolic and p not in (0.0, 1.0):
                    raise ValueError("symbolic runs only accept p in {0, 1} errors")
                if p == 1.0 or (p > 0.0 and rng.random() < p):
                    sim.apply_pauli(PauliString.from_sparse(n, {q: basis}))
        elif op == "DPH2":
            p = inst.args[0]
            if symbolic and p != 0.0:
                raise ValueError("symbolic runs only accept p=0 DPH2")
            for i in range(0, len(inst.targets), 2):
                if p > 0.0 and rng.random() < p:
                    for q in (inst.targets[i], inst.targets[i + 1]):
                        if rng.random() < 0.5:
                            sim.apply_pauli(PauliString.from_sparse(n, {q: "Z"}))
        elif op == "DETECTOR":
            form = record_parity(inst.targets)
            if symbolic and not form.deterministic:
                detectors.append(None)
            else:
                detectors.append(form.const)
        elif op == "OBSERVABLE_INCLUDE":
            k = int(inst.args[0])
            cur = observables.get(k, Affine(0))
            observables[k] = cur ^ record_parity(inst.targets)
        elif op in ("TICK", "QUBIT_COORDS", "SHIFT_COORDS"):
            pass
        else:  # pragma: no cover
            raise ValueError(f"unhandled opcode {op}")
        if check:
            sim.check_invariants()

    obs_bits = {}
    for k, form in observables.items():
        if symbolic and not form.deterministic:
            obs_bits[k] = None
        else:
            obs_bits[k] = form.const
    return RunResult(measurements, det_flags, forms, detectors, obs_bits)
