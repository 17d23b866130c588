"""Linear optics of the repeat-until-success (RUS) two-spin operation.

Two spins each emit one photon entangled with their state (spin a into
modes 0/1, spin b into modes 2/3, dual-rail). The photons pass a 4-mode
interferometer U(phi) and are counted with number-resolving detectors.
The detection pattern classifies the attempt:

* bunched pattern (both photons in one mode): identity up to a known Z
  correction, attempt repeated;
* mixed pattern across the a/b mode pairs: success. At phi = 0 the net
  effect is a nondestructive ZZ measurement; at phi = pi/2 it is a CZ
  gate after a known S-word correction;
* fewer than two photons: heralded erasure, complete dephasing of both
  spins.

This module carries the exact amplitude algebra plus the closed-form
outcome probabilities consumed by the noise model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def build_interferometer(phi):
    """4-mode interferometer; matrix[j, k] maps input mode k to output j."""
    e = np.exp(1j * phi)
    m = np.array([
        [1, 1, 1, -1],
        [1, 1, -1, 1],
        [e, -e, 1, 1],
        [-e, e, 1, 1],
    ], dtype=complex) / 2
    return Interferometer(phi=phi, matrix=m)


@dataclass(frozen=True)
class Interferometer:
    phi: float
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        dev = np.abs(self.matrix @ self.matrix.conj().T - np.eye(4)).max()
        if dev > 1e-12:
            raise ValueError(f"interferometer not unitary (deviation {dev:.2e})")


@dataclass(frozen=True)
class SpinPairState:
    """Product state (alpha|0>+beta|1>)_a (gamma|0>+delta|1>)_b."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex

    def __post_init__(self):
        for pair in ((self.alpha, self.beta), (self.gamma, self.delta)):
            norm = abs(pair[0]) ** 2 + abs(pair[1]) ** 2
            if abs(norm - 1) > 1e-12:
                raise ValueError("spin state not normalized")


# All two-photon detection patterns, bunched first.
TWO_PHOTON_PATTERNS = tuple(
    (p, q) for p in range(4) for q in range(p, 4)
)


def amplitude_table(s, phi):
    """Unnormalized spin amplitudes (|00>,|01>,|10>,|11>) per pattern.

    The returned coefficients are scaled by 4 so that, for product spin
    amplitudes divided out, entries are small integer combinations of
    e^{i phi} (1+e^{i phi}, 2, ...). Bunched-pattern probabilities carry
    an extra factor 2 from boson statistics; see pattern_probabilities.
    """
    u = build_interferometer(phi).matrix
    # Columns of u are the output expansions of the four input modes;
    # spin term |s_a s_b> rides on input modes (s_a, 2 + s_b).
    spin_amp = (s.alpha * s.gamma, s.alpha * s.delta,
                s.beta * s.gamma, s.beta * s.delta)
    table = {}
    for p, q in TWO_PHOTON_PATTERNS:
        row = np.zeros(4, dtype=complex)
        for k, (ma, mb) in enumerate(((0, 2), (0, 3), (1, 2), (1, 3))):
            if p == q:
                coeff = u[p, ma] * u[p, mb]
            else:
                coeff = u[p, ma] * u[q, mb] + u[q, ma] * u[p, mb]
            row[k] = 4 * coeff * spin_amp[k]
        table[(p, q)] = row
    return table


def pattern_probabilities(s, phi):
    """Detection-pattern distribution (no loss); sums to 1."""
    table = amplitude_table(s, phi)
    probs = {}
    for (p, q), row in table.items():
        w = float(np.sum(np.abs(row) ** 2)) / 16
        probs[(p, q)] = 2 * w if p == q else w
    return probs


@dataclass(frozen=True)
class PatternVerdict:
    pattern: tuple
    kind: str                 # Success | Repeat | Erasure | Impossible
    correction: tuple = ()    # ((gate, spin), ...) with spin in {a, b}
    projection: int = 0       # phi=0 Success only: ZZ outcome sign +-1


_REPEAT_B = {(0, 0), (1, 1)}
_REPEAT_A = {(2, 2), (3, 3)}
# Derived from the amplitude table: {(0,2),(1,3)} carry
# |Phi+> - i sin-weighted |Psi+>, so at phi=pi/2 they need S_a S_b, and
# {(0,3),(1,2)} need S_a^dag S_b^dag. At phi=0 the first group projects
# onto Phi+ (ZZ = +1) and the second onto Psi+ (ZZ = -1).
_SUCCESS_PLUS = {(0, 2), (1, 3)}
_SUCCESS_MINUS = {(0, 3), (1, 2)}
_IMPOSSIBLE = {(0, 1), (2, 3)}


def classify_pattern(pattern, phi):
    """Map a detection pattern to its verdict for phi in {0, pi/2}."""
    if not (math.isclose(phi, 0.0, abs_tol=1e-12) or math.isclose(phi, math.pi / 2, rel_tol=1e-12)):
        raise ValueError("classification defined for phi in {0, pi/2} only")
    is_cz = phi > 0.1
    if pattern is None or (isinstance(pattern, tuple) and len(pattern) < 2):
        return PatternVerdict(pattern=pattern or (), kind="Erasure")
    pattern = tuple(sorted(pattern))
    if pattern in _REPEAT_B:
        return PatternVerdict(pattern, "Repeat", correction=(("Z", "b"),))
    if pattern in _REPEAT_A:
        return PatternVerdict(pattern, "Repeat", correction=(("Z", "a"),))
    if pattern in _SUCCESS_PLUS:
        corr = (("S", "a"), ("S", "b")) if is_cz else ()
        return PatternVerdict(pattern, "Success", correction=corr,
                              projection=0 if is_cz else +1)
    if pattern in _SUCCESS_MINUS:
        corr = (("S_DAG", "a"), ("S_DAG", "b")) if is_cz else ()
        return PatternVerdict(pattern, "Success", correction=corr,
                              projection=0 if is_cz else -1)
    if pattern in _IMPOSSIBLE:
        return PatternVerdict(pattern, "Impossible")
    raise ValueError(f"not a detection pattern: {pattern!r}")


@dataclass(frozen=True)
class RusProbabilities:
    epsilon: float
    p_s: float
    p_r: float
    p_e: float
    p_rus: float
    expected_trials_cz: float
    expected_trials_mzz: float


def rus_probabilities(epsilon):
    """Outcome probabilities for one attempt and the overall failure rate.

    With per-photon loss rate epsilon, a single attempt succeeds or
    repeats with probability (1-eps)^2/2 each and erases otherwise; with
    unbounded retries the overall failure probability is
    p_RUS = p_e / (1 - p_r).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("loss rate must lie in [0, 1]")
    t = (1 - epsilon) ** 2
    p_s = p_r = t / 2
    p_e = 1 - t
    p_rus = (2 - 2 * t) / (2 - t)
    inf = math.inf
    return RusProbabilities(
        epsilon=epsilon, p_s=p_s, p_r=p_r, p_e=p_e, p_rus=p_rus,
        expected_trials_cz=1 / (p_s + p_e) if p_s + p_e > 0 else inf,
        expected_trials_mzz=1 / p_s if p_s > 0 else inf,
    )


def erasure_rate_for_p_rus(p_rus):
    """Invert p_RUS(eps): the per-photon loss giving the target failure rate."""
    if not 0.0 <= p_rus <= 1.0:
        raise ValueError("p_RUS must lie in [0, 1]")
    # p = (2 - 2t)/(2 - t) with t = (1-eps)^2  =>  t = 2(1 - p)/(2 - p).
    t = 2 * (1 - p_rus) / (2 - p_rus)
    return 1 - math.sqrt(t)


def decoherence_pz(ratio):
    """Z-flip probability from spin dephasing over one RUS duration.

    ratio = t_RUS / T2; the channel is a Z error with probability
    (1 - exp(-ratio)) / 2.
    """
    if ratio < 0:
        raise ValueError("time ratio must be nonnegative")
    return (1 - math.exp(-ratio)) / 2


def amplitude_table_csv(phi):
    """Render the pattern/amplitude table as CSV text (CLI helper)."""
    import io

    s = SpinPairState(0.5 ** 0.5, 0.5 ** 0.5, 0.5 ** 0.5, 0.5 ** 0.5)
    table = amplitude_table(s, phi)
    buf = io.StringIO()
    buf.write("pattern,kind,amp00,amp01,amp10,amp11\n")
    for pattern, row in table.items():
        try:
            kind = classify_pattern(pattern, phi).kind
        except ValueError:
            kind = "?"
        # Divide the uniform spin amplitudes (1/2 each) back out so the
        # entries are the bare pattern coefficients.
        vals = ",".join(f"{2 * v:.6g}" for v in row)
        buf.write(f"{pattern[0]}|{pattern[1]},{kind},{vals}\n")
    return buf.getvalue()
