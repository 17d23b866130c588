"""Circuit intermediate representation, text format, parser and printer.

Circuits are flat, line-oriented instruction lists over indexed qubits.
Targets are plain integers: a non-negative value is a qubit index, a
negative value ``-k`` is the measurement-record back-reference ``rec[-k]``.
High-level circuits may contain RUS_* operations; lowered instances must
not (see :mod:`spoqclab.noise` for the lowering rules).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


# Opcodes grouped by how their args/targets are checked.
UNITARY_1Q = ("R", "RX", "H", "H_YZ", "S", "S_DAG")
UNITARY_2Q = ("CZ",)
MEASURE_1Q = ("M", "MX")
MEASURE_2Q = ("MZZ", "MXX", "MYY")
RUS_OPS = ("RUS_CZ", "RUS_MZZ", "RUS_MXX", "RUS_MYY")
ERROR_1Q = ("X_ERROR", "Y_ERROR", "Z_ERROR")
ERROR_2Q = ("DPH2",)
ANNOTATIONS = ("DETECTOR", "OBSERVABLE_INCLUDE")
MISC = ("QUBIT_COORDS", "TICK", "SHIFT_COORDS")

OPCODES = frozenset(
    UNITARY_1Q + UNITARY_2Q + MEASURE_1Q + MEASURE_2Q + RUS_OPS
    + ERROR_1Q + ERROR_2Q + ANNOTATIONS + MISC
)

# Opcodes whose execution appends one record bit per target (or per pair).
MEASUREMENT_OPS = frozenset(MEASURE_1Q) | frozenset(MEASURE_2Q)
# RUS measurement ops produce one record per target pair once lowered.
RUS_MEASUREMENT_OPS = frozenset(("RUS_MZZ", "RUS_MXX", "RUS_MYY"))

PAIRWISE_OPS = frozenset(UNITARY_2Q + MEASURE_2Q + RUS_OPS + ERROR_2Q)
PROB_OPS = frozenset(ERROR_1Q + ERROR_2Q)


class CircuitError(ValueError):
    """Raised on malformed circuit text or malformed instructions."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", col {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


def _canonical_targets(opcode, targets):
    if opcode in ERROR_1Q:
        return tuple(sorted(targets))
    if opcode in ERROR_2Q:
        pairs = sorted(tuple(sorted(targets[i:i + 2])) for i in range(0, len(targets), 2))
        return tuple(t for pair in pairs for t in pair)
    return tuple(targets)


@dataclass(frozen=True)
class Instruction:
    """A single circuit instruction.

    ``args`` are real parameters (probabilities or coordinates), ``targets``
    are qubit indices (>= 0) or record back-references (< 0, value ``-k``
    for ``rec[-k]``).
    """

    opcode: str
    args: tuple = ()
    targets: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(float(a) for a in self.args))
        object.__setattr__(
            self, "targets", _canonical_targets(self.opcode, tuple(int(t) for t in self.targets))
        )
        self._check()

    def _check(self):
        op = self.opcode
        if op not in OPCODES:
            raise CircuitError(f"unknown opcode {op!r}")
        if op in PROB_OPS:
            if len(self.args) != 1:
                raise CircuitError(f"{op} takes exactly one probability argument")
            p = self.args[0]
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise CircuitError(f"{op} probability {p} out of range [0, 1]")
        elif op == "OBSERVABLE_INCLUDE":
            if len(self.args) != 1 or self.args[0] != int(self.args[0]) or self.args[0] < 0:
                raise CircuitError("OBSERVABLE_INCLUDE takes one non-negative integer index")
        elif op in ("TICK",):
            if self.args or self.targets:
                raise CircuitError("TICK takes no arguments or targets")
        elif op not in ("QUBIT_COORDS", "DETECTOR", "SHIFT_COORDS") and self.args:
            raise CircuitError(f"{op} takes no arguments")

        if op in UNITARY_2Q + MEASURE_2Q + RUS_OPS + ERROR_2Q:
            if len(self.targets) == 0 or len(self.targets) % 2 != 0:
                raise CircuitError(f"{op} needs an even, non-zero number of targets")
            for i in range(0, len(self.targets), 2):
                if self.targets[i] == self.targets[i + 1]:
                    raise CircuitError(f"{op} pair targets must be distinct")
        if op in ANNOTATIONS:
            if any(t >= 0 for t in self.targets):
                raise CircuitError(f"{op} targets must be record references")
        elif op == "SHIFT_COORDS":
            if self.targets:
                raise CircuitError("SHIFT_COORDS takes no targets")
        elif op != "TICK":
            if any(t < 0 for t in self.targets):
                raise CircuitError(f"{op} targets must be qubit indices")
            if op != "QUBIT_COORDS" and not self.targets:
                raise CircuitError(f"{op} needs at least one target")
            if op == "QUBIT_COORDS" and len(self.targets) != 1:
                raise CircuitError("QUBIT_COORDS takes exactly one target")
            if op not in ERROR_1Q + ERROR_2Q and len(set(self.targets)) != len(self.targets):
                raise CircuitError(f"{op} targets must be distinct")

    @property
    def num_records(self):
        """Number of measurement-record bits this instruction appends."""
        if self.opcode in MEASURE_1Q:
            return len(self.targets)
        if self.opcode in MEASURE_2Q or self.opcode in RUS_MEASUREMENT_OPS:
            return len(self.targets) // 2
        return 0


@dataclass
class Circuit:
    """An ordered instruction list with optional qubit plane coordinates."""

    instructions: list = field(default_factory=list)
    coordinates: dict = field(default_factory=dict)

    @property
    def qubit_count(self):
        n = 0
        for inst in self.instructions:
            for t in inst.targets:
                if t >= 0:
                    n = max(n, t + 1)
        return n

    @property
    def level(self):
        return "HighLevel" if any(i.opcode in RUS_OPS for i in self.instructions) else "Instance"

    @property
    def num_measurements(self):
        return sum(i.num_records for i in self.instructions)

    @property
    def num_rus(self):
        return sum(1 for i in self.instructions for _ in range(len(i.targets) // 2)
                   if i.opcode in RUS_OPS)

    @property
    def num_detectors(self):
        return sum(1 for i in self.instructions if i.opcode == "DETECTOR")

    def append(self, opcode, targets=(), args=()):
        inst = Instruction(opcode, args=args, targets=targets)
        self.instructions.append(inst)
        return inst

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.instructions == other.instructions and self.coordinates == other.coordinates

    def __str__(self):
        return print_circuit(self)


def _format_real(x):
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _format_target(t):
    return f"rec[{t}]" if t < 0 else str(t)


def print_circuit(circuit):
    """Render a circuit to its canonical text form."""
    lines = []
    for q in sorted(circuit.coordinates):
        x, y = circuit.coordinates[q]
        lines.append(f"QUBIT_COORDS({_format_real(x)}, {_format_real(y)}) {q}")
    for inst in circuit.instructions:
        if inst.opcode == "QUBIT_COORDS":
            continue
        parts = [inst.opcode]
        if inst.args:
            parts[0] += "(" + ", ".join(_format_real(a) for a in inst.args) + ")"
        parts.extend(_format_target(t) for t in inst.targets)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def parse_circuit(text):
    """Parse circuit text, reporting positioned errors on malformed input."""
    circuit = Circuit()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        args = ()
        if "(" in head:
            opcode, _, arg_text = head.partition("(")
            if not arg_text.endswith(")"):
                # Args may contain spaces: re-split on the closing paren.
                opcode, _, tail = line.partition("(")
                arg_text, close, rest = tail.partition(")")
                if not close:
                    raise CircuitError("expected ')'", lineno, line.index("(") + 1)
            else:
                arg_text = arg_text[:-1]
            try:
                args = tuple(float(a) for a in arg_text.split(","))
            except ValueError:
                raise CircuitError(f"bad argument list {arg_text!r}", lineno) from None
        else:
            opcode = head
        if opcode not in OPCODES:
            raise CircuitError(f"unknown opcode {opcode!r}", lineno, 1)
        targets = []
        for tok in rest.split():
            if tok.startswith("rec[") and tok.endswith("]"):
                try:
                    offset = int(tok[4:-1])
                except ValueError:
                    raise CircuitError(f"bad record reference {tok!r}", lineno) from None
                if offset >= 0:
                    raise CircuitError(f"record reference {tok!r} must be negative", lineno)
                targets.append(offset)
            else:
                try:
                    t = int(tok)
                except ValueError:
                    raise CircuitError(f"bad target {tok!r}", lineno) from None
                if t < 0:
                    raise CircuitError(f"qubit index {t} is negative", lineno)
                targets.append(t)
        try:
            inst = Instruction(opcode, args=args, targets=targets)
        except CircuitError as e:
            raise CircuitError(str(e), lineno) from None
        if opcode == "QUBIT_COORDS":
            circuit.coordinates[inst.targets[0]] = tuple(inst.args)
        else:
            circuit.instructions.append(inst)
    return circuit


def validate(circuit):
    """Return a list of diagnostic strings; empty means well-formed."""
    diagnostics = []
    level = circuit.level
    records = 0
    for idx, inst in enumerate(circuit.instructions):
        if inst.opcode in RUS_OPS and level == "Instance":
            # Cannot happen (level is inferred), kept for externally built values.
            diagnostics.append(f"instruction {idx}: RUS op in Instance circuit")
        for t in inst.targets:
            if t < 0 and -t > records:
                diagnostics.append(
                    f"instruction {idx}: rec[{t}] refers before the start of the record"
                )
        records += inst.num_records
    return diagnostics


def referenced_records(circuit):
    """Map each DETECTOR / OBSERVABLE_INCLUDE to absolute record indices.

    Returns (detectors, observables) where detectors is a list of sorted
    index tuples in DETECTOR order and observables maps observable index
    to a sorted tuple of record indices.
    """
    detectors = []
    observables = {}
    records = 0
    for inst in circuit.instructions:
        if inst.opcode == "DETECTOR":
            detectors.append(tuple(sorted(records + t for t in inst.targets)))
        elif inst.opcode == "OBSERVABLE_INCLUDE":
            k = int(inst.args[0])
            cur = set(observables.get(k, ()))
            cur ^= {records + t for t in inst.targets}
            observables[k] = tuple(sorted(cur))
        records += inst.num_records
    return detectors, observables
