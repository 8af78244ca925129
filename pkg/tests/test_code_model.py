import collections
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr.code_model import (CircuitSchedule, DetectorCoord, ErrorClass, ErrorSignature, PauliFault,
                                 absolute_fault_signatures, build_layout, build_schedule, canonical_key,
                                 classify_signature, enumerate_fault_catalog, generate_c_class, propagate_fault)


@pytest.mark.parametrize("d", [3, 5])
def test_layout_is_a_valid_surface_code(d):
    lay = build_layout(d)
    assert lay.n_data == d * d
    assert len(lay.ancillas) == d * d - 1
    xs, zs = lay.ancillas_of("X"), lay.ancillas_of("Z")
    assert len(xs) == len(zs) == (d * d - 1) // 2
    for a in xs:
        for b in zs:
            assert len(set(a.support) & set(b.support)) % 2 == 0
    for a in lay.ancillas:
        assert len(a.support) in (2, 4)
    assert json.loads(lay.to_json())


def test_detector_counts(layout):
    # one detector per ancilla and cycle after the first, plus the final data readout of the measured kind
    for n in (2, 4, 16):
        sch = build_schedule(layout, n, "Z")
        assert sch.n_detectors == 8 * n - 4
        assert sch.n_detectors == len(set(sch.detector_list))
    assert build_schedule(layout, 1, "Z").n_detectors == 8


def test_detector_cycle():
    assert [CircuitSchedule.detector_cycle(t) for t in range(6)] == [0, 1, 1, 2, 2, 3]


def test_catalog_reference_numbers(catalog4, sched4, layout):
    assert len(catalog4) == 112
    assert len(catalog4.detector_keys()) == 112
    assert catalog4.total_nu() == 344
    counts = collections.Counter(classify_signature(k, layout, sched4, catalog4).value
                                 for k in catalog4.detector_keys())
    assert counts == {"M_XY": 32, "S_Y": 18, "H_Y": 16, "B": 8, "T": 8, "M_ZZ": 8, "S_XZ": 6,
                      "ST_X": 6, "ST_Y": 6, "H_X": 4}


def test_catalog_is_cycle_independent(layout):
    a = enumerate_fault_catalog(build_schedule(layout, 4, "Z"))
    b = enumerate_fault_catalog(build_schedule(layout, 16, "Z"))
    assert set(a.detector_keys()) == set(b.detector_keys())


@settings(max_examples=30, deadline=None)
@given(st.integers(-6, 6))
def test_canonical_key_is_time_invariant(dt):
    sig = ErrorSignature((DetectorCoord("Z1", 8), DetectorCoord("X2", 9)))
    assert canonical_key(sig.shifted(2 * dt).detectors) == canonical_key(sig.detectors)


def test_data_faults_only_flip_their_own_stabilizers(sched4, layout):
    faults, sigs = absolute_fault_signatures(sched4)
    found = 0
    for f, s in zip(faults, sigs):
        loc = sched4.locations[f.location]
        if loc.kind == "idle" and loc.qubits[0] < layout.n_data and loc.cycle == 2:
            q = loc.qubits[0]
            near = {a.name for a in layout.ancillas if q in a.support}
            assert {d.ancilla for d in s.detectors} <= near
            found += bool(s.detectors)
    assert found > 0


def test_propagation_is_linear(sched4):
    loc = next(l for l in sched4.locations if l.kind == "2q")
    a = propagate_fault(sched4, PauliFault(loc.index, "XI"))
    b = propagate_fault(sched4, PauliFault(loc.index, "IZ"))
    ab = propagate_fault(sched4, PauliFault(loc.index, "XZ"))
    assert set(ab.detectors) == set(a.detectors) ^ set(b.detectors)
    assert ab.logical_flip_z == (a.logical_flip_z ^ b.logical_flip_z)


def test_c_class_templates(layout, sched4):
    cs = generate_c_class(layout, sched4)
    assert len(cs) == 4360
    assert min(s.weight for s in cs) == 2 and max(s.weight for s in cs) == 10
    assert all(classify_signature(s.detectors, layout, sched4) is ErrorClass.C for s in cs[::50])
