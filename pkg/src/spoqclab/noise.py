"""Noise model and lowering of high-level circuits to concrete instances.

Three channels:

* heralded erasure: each RUS operation independently fails with
  probability p_RUS; a failed operation completely dephases both
  participating spins in the operation's basis. The herald is encoded by
  probability-1/2 error instructions in the lowered circuit.
* distinguishability D: correlated two-qubit dephasing next to every RUS
  operation. Each interference attempt dephases the pair with strength D,
  and a repeat-until-success operation consumes two attempts on average
  at zero photon loss, so the inserted instruction is the composition of
  two DPH2(D) events, which is exactly DPH2(1 - (1 - D)^2).
* decoherence t_RUS/T2: a Z error with probability (1 - exp(-ratio))/2
  on every qubit at every TICK (one TICK per RUS time slot).

Lowering keeps the gate content fixed (an erased CZ stays in the
circuit: full Z dephasing of both qubits makes the state diagonal, on
which the diagonal CZ acts trivially, so the channels are identical;
an erased pair measurement keeps its measurement, whose outcome
distribution commutes with the heralding errors). This keeps record
indices aligned between the high-level circuit and every instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Instruction, RUS_OPS
from .optics import decoherence_pz, rus_probabilities

# Basis of the heralding dephasing per RUS opcode.
_ERASE_BASIS = {
    "RUS_CZ": "Z_ERROR",
    "RUS_MZZ": "Z_ERROR",
    "RUS_MXX": "X_ERROR",
    "RUS_MYY": "Y_ERROR",
}
_LOWERED = {"RUS_CZ": "CZ", "RUS_MZZ": "MZZ", "RUS_MXX": "MXX", "RUS_MYY": "MYY"}


@dataclass(frozen=True)
class NoiseModel:
    p_rus: float = 0.0
    distinguishability: float = 0.0
    decoherence_ratio: float = 0.0
    flavor: str = "SPOQC2"

    def __post_init__(self):
        if not 0.0 <= self.p_rus <= 1.0:
            raise ValueError("p_RUS out of range")
        if not 0.0 <= self.distinguishability <= 1.0:
            raise ValueError("distinguishability out of range")
        if self.decoherence_ratio < 0:
            raise ValueError("decoherence ratio must be nonnegative")
        if self.flavor not in ("SPOQC", "SPOQC2"):
            raise ValueError(f"unknown flavor {self.flavor!r}")

    @classmethod
    def from_epsilon(cls, epsilon, **kw):
        return cls(p_rus=rus_probabilities(epsilon).p_rus, **kw)

    @property
    def p_z(self):
        return decoherence_pz(self.decoherence_ratio)


@dataclass
class RusSite:
    """One RUS operation (one target pair of one RUS instruction)."""

    instruction_index: int
    pair_index: int
    opcode: str
    targets: tuple


def rus_sites(circuit):
    sites = []
    for k, inst in enumerate(circuit.instructions):
        if inst.opcode in RUS_OPS:
            for p in range(0, len(inst.targets), 2):
                sites.append(RusSite(k, p // 2, inst.opcode, inst.targets[p:p + 2]))
    return sites


@dataclass
class ErasureInstance:
    base: Circuit
    coins: np.ndarray            # bool per RUS site, True = erased
    lowered: Circuit
    erased_sites: list = field(default_factory=list)   # RusSite values


def apply_pauli_noise(circuit, nm):
    """Insert DPH2 next to RUS operations and Z errors at TICKs."""
    d = nm.distinguishability
    d_eff = 1.0 - (1.0 - d) ** 2    # two interference attempts per RUS op
    p_z = nm.p_z
    n = circuit.qubit_count
    out = Circuit(coordinates=dict(circuit.coordinates))
    for inst in circuit.instructions:
        if inst.opcode in RUS_OPS and d > 0:
            out.instructions.append(Instruction("DPH2", args=(d_eff,), targets=inst.targets))
        if inst.opcode == "TICK" and p_z > 0 and n:
            out.instructions.append(Instruction("Z_ERROR", args=(p_z,), targets=range(n)))
        out.instructions.append(inst)
    return out


def sample_instance(circuit, nm, seed):
    """Toss one erasure coin per RUS operation and lower the circuit.

    Deterministic given (circuit, nm, seed): coins are drawn from a
    dedicated generator in site order.
    """
    rng = np.random.default_rng(seed)
    sites = rus_sites(circuit)
    coins = rng.random(len(sites)) < nm.p_rus
    return lower_with_coins(circuit, coins)


def lower_with_coins(circuit, coins):
    """Lower a high-level circuit given explicit erasure coins."""
    sites = rus_sites(circuit)
    if len(coins) != len(sites):
        raise ValueError("coin count does not match RUS operation count")
    coins = np.asarray(coins, dtype=bool)
    erased_for_instr = {}
    erased_sites = []
    for site, c in zip(sites, coins):
        if c:
            erased_for_instr.setdefault(site.instruction_index, []).extend(site.targets)
            erased_sites.append(site)
    out = Circuit(coordinates=dict(circuit.coordinates))
    for k, inst in enumerate(circuit.instructions):
        if inst.opcode not in RUS_OPS:
            out.instructions.append(inst)
            continue
        hit = erased_for_instr.get(k)
        herald = Instruction(_ERASE_BASIS[inst.opcode], args=(0.5,), targets=hit) if hit else None
        lowered = Instruction(_LOWERED[inst.opcode], targets=inst.targets)
        if inst.opcode == "RUS_CZ":
            out.instructions.append(lowered)
            if herald:
                out.instructions.append(herald)
        else:
            if herald:
                out.instructions.append(herald)
            out.instructions.append(lowered)
    return ErasureInstance(base=circuit, coins=coins, lowered=out, erased_sites=erased_sites)


def lower_ideal(circuit):
    """Noiseless lowering: every RUS operation succeeds."""
    return lower_with_coins(circuit, np.zeros(len(rus_sites(circuit)), dtype=bool)).lowered


# -- dense channel oracles (used by the test suite) ---------------------

_P1 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _dephase(rho, pauli, qubit):
    p = np.kron(_P1[pauli], _P1["I"]) if qubit == 0 else np.kron(_P1["I"], _P1[pauli])
    return (rho + p @ rho @ p) / 2


def effective_channel(opcode, erased):
    """Exact channel of one lowered RUS operation on a 2-qubit state.

    Returns a callable on 4x4 density matrices describing the noise part
    (the heralding dephasing in the operation's basis); the ideal gate or
    measurement itself is applied separately by the caller. Success cases
    return the identity channel.
    """
    if opcode not in RUS_OPS:
        raise ValueError(f"not a RUS opcode: {opcode}")
    if not erased:
        return lambda rho: rho
    basis = {"RUS_CZ": "Z", "RUS_MZZ": "Z", "RUS_MXX": "X", "RUS_MYY": "Y"}[opcode]

    def channel(rho):
        return _dephase(_dephase(rho, basis, 0), basis, 1)

    return channel
