import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syndcorr.code_model import DetectorCoord, enumerate_fault_catalog
from syndcorr.correlation_inference import InferredModel, ModelEntry
from syndcorr.io import (FormatError, ModelFileV1, dumps_dataset, loads_dataset, read_dataset, read_model,
                         write_dataset, write_model)
from syndcorr.noise_sim import SyndromeDataset

DETS = (DetectorCoord("Z1", 2), DetectorCoord("Z2", 2), DetectorCoord("X1", 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.booleans(), st.integers(0, 2**32 - 1))
def test_dataset_roundtrip_is_byte_identical(m, truth, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(m, len(DETS))).astype(np.uint8)
    tr = rng.integers(0, 2, size=(m, 2)).astype(np.uint8) if truth else None
    ds = SyndromeDataset.from_bits(DETS, bits, tr)
    text = dumps_dataset(ds)
    back = loads_dataset(text)
    assert np.array_equal(back.shots, bits)
    assert (back.truth is None) == (tr is None)
    if tr is not None:
        assert np.array_equal(back.truth, tr)
    assert dumps_dataset(back) == text


def test_dataset_layout():
    ds = SyndromeDataset.from_bits(DETS, [[1, 0, 1]], [[0, 1]])
    assert dumps_dataset(ds) == b"QECSYN 1\ndetectors 3\ndet Z1 2\ndet Z2 2\ndet X1 3\ntruth xz\nshots 1\n101 01\n"


GOOD = b"QECSYN 1\ndetectors 2\ndet Z1 2\ndet X1 3\nshots 2\n10\n01\n"


@pytest.mark.parametrize("data,line,col", [
    (GOOD.replace(b"QECSYN 1", b"QECSYN 2"), 1, 1),
    (GOOD.replace(b"detectors 2", b"detectors 02"), 2, 11),
    (GOOD.replace(b"det X1 3", b"det X1 x"), 4, 8),
    (GOOD.replace(b"det X1 3", b"det 1X 3"), 4, 5),
    (GOOD.replace(b"\n01\n", b"\n0a\n"), 7, 2),
    (GOOD.replace(b"\n01\n", b"\n011\n"), 7, 3),
    (GOOD[:-1], 7, 3),
    (GOOD.replace(b"shots 2", b"shots 3"), 8, 1),
    (GOOD.replace(b"det X1 3", b"det Z1 2"), 4, 1),
])
def test_dataset_errors_have_locations(data, line, col):
    with pytest.raises(FormatError) as exc:
        loads_dataset(data, "f.qsyn")
    assert (exc.value.line, exc.value.column) == (line, col)
    assert str(exc.value).startswith(f"f.qsyn:{line}:{col}: ")


def test_dataset_files(tmp_path, data4):
    p = tmp_path / "d.qsyn"
    write_dataset(p, data4)
    back = read_dataset(p)
    assert back.digest() == data4.digest()


def test_model_roundtrip(tmp_path, avg4, sched4):
    mf = ModelFileV1.from_model(avg4, sched4, enumerate_fault_catalog(sched4))
    p = tmp_path / "m.json"
    write_model(p, mf)
    text = p.read_bytes()
    back = read_model(p)
    assert back.dumps().encode() == text
    m2 = back.to_model()
    assert set(m2.keys()) == set(avg4.keys())
    for k, e in avg4.items():
        if math.isfinite(e.p):
            assert m2.p(k) == e.p
    assert back.metadata["cycle_averaged"]
    assert {r.cls for r in back.records} >= {"T", "B", "C"}
    assert any(r.logical_flip_z for r in back.records)
    assert all(c.probability > 0 for c in back.channels())


def test_model_nan_and_errors():
    k = (DetectorCoord("Z1", 2),)
    mf = ModelFileV1.from_model(InferredModel({k: ModelEntry(float("nan"), None)}))
    text = mf.dumps()
    assert '"p": null' in text
    assert math.isnan(ModelFileV1.loads(text).records[0].p)
    with pytest.raises(FormatError) as exc:
        ModelFileV1.loads('{"format": "QECMODEL 1",\n "entries": [}', "m.json")
    assert exc.value.line == 2
    with pytest.raises(FormatError):
        ModelFileV1.loads('{"format": "other"}')
    bad = text.replace('"Z1"', '"Z1", 5, 6')
    with pytest.raises(FormatError) as exc:
        ModelFileV1.loads(bad, "m.json")
    assert exc.value.line > 1
