"""Memory-circuit generators: honeycomb code (torus) and rotated surface code.

Builders emit bare high-level circuits, then annotate them through a
discover-and-certify pass: candidate detectors come from structural
templates (first-round checks, consecutive plaquette inferences, final
readout completions) and a candidate is kept only if one symbolic
tableau run proves its parity deterministic and zero. The logical
observable is found from the GF(2) nullspace of the record/coin matrix,
quotiented by the detector span; among the logical classes the one with
the smallest certified fault distance is annotated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

from .circuit import Circuit, Instruction
from .lattice import RED, GREEN, BLUE, HoneycombLattice
from .noise import lower_ideal
from .tableau import deterministic_parity_basis, run as tableau_run
from . import decode

# One full honeycomb period: red-green-blue-red-blue-green.
SCHEDULE = (RED, GREEN, BLUE, RED, BLUE, GREEN)
COLOR_BASIS = {RED: "X", GREEN: "Y", BLUE: "Z"}
_CONJUGATION = {"X": "H", "Y": "H_YZ", "Z": None}


@dataclass(frozen=True)
class CodeSpec:
    family: str           # honeycomb | surface
    size: int             # lattice parameter L or distance d
    rounds: int = 0       # sub-rounds (honeycomb) / rounds (surface); 0 = default
    flavor: str = "SPOQC2"
    memory_basis: str = "X"

    def __post_init__(self):
        if self.family not in ("honeycomb", "surface"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.flavor not in ("SPOQC", "SPOQC2"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.memory_basis != "X":
            raise ValueError("only X-memory experiments are supported")
        if self.family == "honeycomb" and self.size < 2:
            raise ValueError("honeycomb lattice parameter must be >= 2")
        if self.family == "surface":
            if self.size < 3 or self.size % 2 == 0:
                raise ValueError("surface distance must be odd and >= 3")
            if self.flavor != "SPOQC":
                raise ValueError("the CZ-extracted surface code is a SPOQC circuit")
        if self.rounds == 0:
            rounds = 6 * self.size + 1 if self.family == "honeycomb" else self.size
            object.__setattr__(self, "rounds", rounds)
        if self.family == "honeycomb":
            # The final transversal X readout must directly follow an
            # X-basis sub-round so that every X edge gets a three-record
            # completion; the schedule hits the X color at t % 3 == 0.
            if self.rounds < 7 or self.rounds % 3 != 1:
                raise ValueError("honeycomb sub-round count must be >= 7 "
                                 "and equal 1 modulo 3")


@dataclass
class BuildResult:
    spec: CodeSpec
    circuit: Circuit          # annotated high-level circuit
    detectors: list           # frozensets of absolute record indices
    observable: frozenset
    observable_classes: list  # all logical classes (frozensets)
    distance: int             # certified fault distance of the observable
    num_data: int
    num_records: int
    observable_const: int = 0  # noiseless parity value of the observable


# -- honeycomb ----------------------------------------------------------

def _honeycomb_bare(spec):
    lat = HoneycombLattice(spec.size)
    v = lat.num_vertices
    c = Circuit(coordinates=lat.coordinates())
    by_color = {col: [i for i, e in enumerate(lat.edges) if e.color == col]
                for col in (RED, GREEN, BLUE)}
    c.append("RX", range(v))
    records = 0
    edge_record = {}
    for t in range(spec.rounds):
        color = SCHEDULE[t % 6]
        basis = COLOR_BASIS[color]
        conj = _CONJUGATION[basis]
        edges = by_color[color]
        pairs = [q for i in edges for q in (lat.edges[i].a, lat.edges[i].b)]
        if spec.flavor == "SPOQC2":
            if conj:
                c.append(conj, range(v))
            c.append("RUS_MZZ", pairs)
            c.append("TICK")
            if conj:
                c.append(conj, range(v))
        else:
            anc = [v + i for i in edges]
            c.append("RX", anc)
            if conj:
                c.append(conj, range(v))
            c.append("RUS_CZ", [q for i, e in zip(edges, anc)
                                for q in (e, lat.edges[i].a)])
            c.append("TICK")
            c.append("RUS_CZ", [q for i, e in zip(edges, anc)
                                for q in (e, lat.edges[i].b)])
            c.append("TICK")
            if conj:
                c.append(conj, range(v))
            c.append("MX", anc)
        for k, i in enumerate(edges):
            edge_record[(t, i)] = records + k
        records += len(edges)
    c.append("MX", range(v))
    final_record = {q: records + q for q in range(v)}
    records += v
    return c, lat, edge_record, final_record, records


def _honeycomb_candidates(spec, lat, edge_record, final_record):
    """Ordered candidate detectors; earlier entries win independence ties."""
    candidates = []
    # First sub-round single-check detectors.
    for (t, _e), r in sorted(edge_record.items()):
        if t == 0:
            candidates.append(frozenset((r,)))
    late = []
    # Per-edge completions: the last sub-round is X-colored, so the final
    # transversal readout checks each of its edges directly.
    t_last = spec.rounds - 1
    for i, e in enumerate(lat.edges):
        if (t_last, i) in edge_record:
            late.append(frozenset((edge_record[(t_last, i)],
                                   final_record[e.a], final_record[e.b])))
    for p in lat.plaquettes:
        # Distinct consecutive inferred plaquette values.
        snapshots = []
        latest = {}
        for t in range(spec.rounds):
            for e in p.edges:
                if (t, e) in edge_record:
                    latest[e] = edge_record[(t, e)]
            if len(latest) == 6:
                snap = frozenset(latest.values())
                if not snapshots or snapshots[-1] != snap:
                    snapshots.append(snap)
        if snapshots:
            candidates.append(snapshots[0])
        for gap in (1, 2, 3):
            for k in range(len(snapshots) - gap):
                diff = snapshots[k] ^ snapshots[k + gap]
                if diff:
                    candidates.append(diff)
        # Final-readout completions: prefer forms that make late errors
        # flip detector pairs rather than triples. Plaquettes whose
        # conserved value is -1 have completions of constant parity one;
        # pairing the first and last snapshots cancels the constant.
        vertex_set = frozenset(final_record[q] for q in p.vertices)
        if snapshots:
            for k in (-1, -2, -3):
                if len(snapshots) >= -k:
                    diff = snapshots[k] ^ vertex_set
                    if diff:
                        late.append(diff)
                    diff = snapshots[0] ^ snapshots[k] ^ vertex_set
                    if diff:
                        late.append(diff)
        late.append(vertex_set)
    candidates += late
    seen = set()
    out = []
    for cand in candidates:
        if cand and cand not in seen:
            seen.add(cand)
            out.append(cand)
    return out


def _honeycomb_global_parities(edge_record, final_record):
    """Candidate conserved global parities built from sub-round totals."""
    totals = {}
    for (t, _e), r in sorted(edge_record.items()):
        totals.setdefault(t, set()).add(r)
    seq = [frozenset(totals[t]) for t in sorted(totals)]
    all_final = frozenset(final_record.values())
    pool = list(seq) + [s ^ all_final for s in seq] + [all_final]
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            pool.append(seq[i] ^ seq[j])
    return pool


# -- rotated surface code ----------------------------------------------

# Interaction offsets per layer, chosen so every data qubit meets at most
# one check per layer and hook errors run across the logical operator.
_X_OFFSETS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_Z_OFFSETS = ((1, 1), (-1, 1), (1, -1), (-1, -1))


def surface_layout(d):
    """Data/ancilla positions of the rotated code. Returns (data, checks)
    where data maps (x, y) -> qubit and checks is a list of
    (qubit, type, position, data-neighbor list)."""
    data = {}
    for r in range(d):
        for col in range(d):
            data[(2 * col + 1, 2 * r + 1)] = r * d + col
    checks = []
    nxt = d * d
    for a in range(d + 1):
        for b in range(d + 1):
            x, y = 2 * a, 2 * b
            kind = "X" if (a + b) % 2 == 1 else "Z"
            neigh = [data[(x + dx, y + dy)] for dx, dy in _X_OFFSETS
                     if (x + dx, y + dy) in data]
            if len(neigh) < 2:
                continue
            if len(neigh) == 2:
                if (b in (0, d)) != (kind == "X"):
                    continue
                if (a in (0, d)) != (kind == "Z"):
                    continue
            checks.append((nxt, kind, (x, y), neigh))
            nxt += 1
    assert len(checks) == d * d - 1
    return data, checks


def _surface_bare(spec):
    d = spec.size
    data, checks = surface_layout(d)
    c = Circuit(coordinates={q: pos for pos, q in data.items()})
    for q, _kind, pos, _n in checks:
        c.coordinates[q] = pos
    c.append("RX", range(d * d))
    records = 0
    check_record = {}
    anc = [q for q, _k, _p, _n in checks]
    for r in range(spec.rounds):
        c.append("RX", anc)
        for layer in range(4):
            pairs = []
            hs = []
            for q, kind, pos, _n in checks:
                dx, dy = (_X_OFFSETS if kind == "X" else _Z_OFFSETS)[layer]
                target = (pos[0] + dx, pos[1] + dy)
                if target in data:
                    pairs += [q, data[target]]
                    if kind == "X":
                        hs.append(data[target])
            if hs:
                c.append("H", sorted(hs))
            c.append("RUS_CZ", pairs)
            c.append("TICK")
            if hs:
                c.append("H", sorted(hs))
        c.append("MX", anc)
        for k, q in enumerate(anc):
            check_record[(r, q)] = records + k
        records += len(anc)
    c.append("MX", range(d * d))
    final_record = {q: records + q for q in range(d * d)}
    records += d * d
    return c, (data, checks), check_record, final_record, records


def _surface_candidates(spec, layout, check_record, final_record):
    """Ordered candidate detectors; earlier entries win independence ties."""
    _data, checks = layout
    candidates = []
    for q, kind, _pos, neigh in checks:
        first = check_record[(0, q)]
        candidates.append(frozenset((first,)))
        for r in range(spec.rounds - 1):
            candidates.append(frozenset((check_record[(r, q)], check_record[(r + 1, q)])))
    for q, kind, _pos, neigh in checks:
        last = check_record[(spec.rounds - 1, q)]
        candidates.append(frozenset([last] + [final_record[n] for n in neigh]))
    return candidates


# -- discovery and certification ---------------------------------------

def certify_candidates(ideal_instance, candidates):
    """Symbolically certify candidates; returns (kept sets, record forms).

    A candidate survives iff its record parity has no coin dependence and
    constant value zero in the noiseless circuit.
    """
    res = tableau_run(ideal_instance, symbolic=True)
    forms = res.forms
    kept = []
    for cand in candidates:
        if _parity_form(forms, cand) == (0, 0):
            kept.append(cand)
    return kept, forms


def _parity_form(forms, records):
    """(coin mask, constant) of a record parity under symbolic forms."""
    mask = 0
    const = 0
    for r in records:
        f = forms[r]
        mask ^= f.mask
        const ^= f.const
    return mask, const


def _independent_subset(kept):
    """Greedy GF(2)-independent choice in candidate priority order."""
    pivots = {}
    chosen = []
    for cand in kept:
        m = 0
        for r in cand:
            m |= 1 << r
        while m:
            piv = m.bit_length() - 1
            if piv not in pivots:
                break
            m ^= pivots[piv]
        if m:
            pivots[m.bit_length() - 1] = m
            chosen.append(cand)
    chosen.sort(key=lambda c: (max(c), max(c) - min(c), tuple(sorted(c))))
    return chosen


def _logical_classes(forms, detectors):
    """Nullspace of the record/coin matrix modulo the detector span."""
    basis = deterministic_parity_basis(forms)
    pivots = {}
    for cand in detectors:
        m = 0
        for r in cand:
            m |= 1 << r
        while m:
            piv = m.bit_length() - 1
            if piv not in pivots:
                pivots[piv] = m
                break
            m ^= pivots[piv]
    logicals = []
    for combo in basis:
        m = combo
        while m:
            piv = m.bit_length() - 1
            if piv not in pivots:
                pivots[piv] = m
                logicals.append(m)
                break
            m ^= pivots[piv]
    return logicals


def _mask_to_set(mask):
    out = set()
    r = 0
    while mask:
        if mask & 1:
            out.add(r)
        mask >>= 1
        r += 1
    return frozenset(out)


def _annotate(circuit, num_records, detectors, observables):
    out = Circuit(instructions=list(circuit.instructions),
                  coordinates=dict(circuit.coordinates))
    for det in detectors:
        out.append("DETECTOR", targets=[r - num_records for r in sorted(det)])
    for k, obs in enumerate(observables):
        out.append("OBSERVABLE_INCLUDE", targets=[r - num_records for r in sorted(obs)],
                   args=(k,))
    return out


def _with_uniform_z(instance, p):
    out = Circuit(coordinates=dict(instance.coordinates))
    n = instance.qubit_count
    for inst in instance.instructions:
        if inst.opcode == "TICK":
            out.instructions.append(Instruction("Z_ERROR", args=(p,), targets=range(n)))
        out.instructions.append(inst)
    return out


@lru_cache(maxsize=32)
def build_code(spec):
    """Build, certify and annotate the memory circuit for a CodeSpec."""
    if spec.family == "honeycomb":
        bare, lat, edge_record, final_record, records = _honeycomb_bare(spec)
        candidates = _honeycomb_candidates(spec, lat, edge_record, final_record)
        num_data = lat.num_vertices
    else:
        bare, layout, check_record, final_record, records = _surface_bare(spec)
        candidates = _surface_candidates(spec, layout, check_record, final_record)
        num_data = spec.size ** 2
    ideal = lower_ideal(bare)
    kept, forms = certify_candidates(ideal, candidates)
    detectors = _independent_subset(kept)
    if not detectors:
        raise RuntimeError("no candidate detector survived certification")
    if spec.family == "honeycomb":
        # Quotient out everything conserved that is not a logical: the
        # annotated detectors, conserved candidates of constant parity
        # one (plaquette values of -1 stabilizers), and global color
        # totals. The remaining classes mix spatial loops with conserved
        # time chains; the protected combination is picked on the error
        # model below.
        span = list(detectors)
        span += [c for c in candidates if _parity_form(forms, c) == (0, 1)]
        span += [g for g in _honeycomb_global_parities(edge_record, final_record)
                 if _parity_form(forms, g)[0] == 0]
        combos = [_mask_to_set(m) for m in _logical_classes(forms, span)]
        if not combos:
            raise RuntimeError("no logical observable class found")
    else:
        logicals = [_mask_to_set(m) for m in _logical_classes(forms, detectors)]
        if not logicals:
            raise RuntimeError("no logical observable class found")
        if len(logicals) > 4:
            raise RuntimeError(f"{len(logicals)} logical classes; builder bug")
        # Every nonzero combination of class representatives is a candidate
        # observable; annotate them all, measure fault distances, keep the
        # smallest (ties broken on the record set).
        combos = []
        for mask in range(1, 1 << len(logicals)):
            acc = frozenset()
            for i, l in enumerate(logicals):
                if mask >> i & 1:
                    acc = acc ^ l
            combos.append(acc)
    probe_base = ideal
    if spec.family == "honeycomb" and spec.flavor == "SPOQC":
        # Record indices match the direct-measurement flavor exactly, and
        # only that flavor has a pairwise error structure under the probe
        # noise (ancilla errors here flip whole measurement records), so
        # distances are ranked on the twin circuit.
        twin_bare, _, _, _, twin_records = _honeycomb_bare(replace(spec, flavor="SPOQC2"))
        assert twin_records == records
        probe_base = lower_ideal(twin_bare)
    probe = _annotate(probe_base, records, detectors, combos)
    dem = decode.build_dem(_with_uniform_z(probe, 0.01))
    if spec.family == "honeycomb":
        mask, distance = decode.protected_combination(dem, len(combos))
        observable = frozenset()
        for i, cls in enumerate(combos):
            if mask >> i & 1:
                observable = observable ^ cls
    else:
        scored = sorted(
            (decode.estimate_graph_distance(dem, observable=k), tuple(sorted(obs)))
            for k, obs in enumerate(combos)
        )
        distance, obs_records = scored[0]
        observable = frozenset(obs_records)
    circuit = _annotate(bare, records, detectors, [observable])
    return BuildResult(spec=spec, circuit=circuit, detectors=detectors,
                       observable=observable, observable_classes=combos,
                       distance=distance, num_data=num_data, num_records=records,
                       observable_const=_parity_form(forms, observable)[1])


def build_honeycomb(spec):
    if spec.family != "honeycomb":
        raise ValueError("spec is not a honeycomb CodeSpec")
    return build_code(spec).circuit


def build_surface_cz(spec):
    if spec.family != "surface":
        raise ValueError("spec is not a surface CodeSpec")
    return build_code(spec).circuit


def resource_count(spec):
    """(spin count, RUS module count) for a honeycomb memory."""
    if spec.family != "honeycomb":
        raise ValueError("resource accounting is defined for the honeycomb code")
    lat = HoneycombLattice(spec.size)
    v, e = lat.num_vertices, lat.num_edges
    if spec.flavor == "SPOQC":
        return v + e, 2 * e
    return v, e
