"""Text file formats for syndrome datasets and error models.

Both writers are canonical: reading a file they produced and writing it again
gives the same bytes.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .code_model import (CircuitSchedule, DetectorCoord, ErrorSignature, FaultCatalog, canonical_detectors,
                         classify_signature, detector_sort_key)
from .correlation_inference import InferredModel, ModelEntry
from .noise_sim import SignatureChannel, SyndromeDataset

DATASET_MAGIC = "QECSYN 1"
MODEL_FORMAT = "QECMODEL 1"

_INT = re.compile(r"(?:0|-?[1-9][0-9]*)\Z")
_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_]*\Z")


class FormatError(ValueError):
    """Malformed input; ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: int = 0, column: int = 0, path: Optional[str] = None):
        self.message, self.line, self.column, self.path = message, line, column, path
        super().__init__(self.location() + message)

    def location(self) -> str:
        where = self.path or "<input>"
        return f"{where}:{self.line}:{self.column}: " if self.line else f"{where}: "


# ---------------------------------------------------------------------------
# Datasets


def dumps_dataset(ds: SyndromeDataset) -> bytes:
    n, m = ds.n_detectors, ds.n_shots
    head = [DATASET_MAGIC, f"detectors {n}"]
    head += [f"det {d.ancilla} {d.tick}" for d in ds.detector_list]
    if ds.truth is not None:
        head.append("truth xz")
    head.append(f"shots {m}")
    bits = ds.shots.astype(np.uint8) + ord("0")
    cols = [bits]
    if ds.truth is not None:
        cols.append(np.full((m, 1), ord(" "), dtype=np.uint8))
        cols.append(ds.truth.astype(np.uint8) + ord("0"))
    cols.append(np.full((m, 1), ord("\n"), dtype=np.uint8))
    body = np.concatenate(cols, axis=1).tobytes() if m else b""
    return ("\n".join(head) + "\n").encode("ascii") + body


def _header_line(lines: List[bytes], i: int, path) -> str:
    if i >= len(lines):
        raise FormatError("unexpected end of file", i + 1, 1, path)
    try:
        return lines[i].decode("ascii")
    except UnicodeDecodeError:
        raise FormatError("non-ASCII header line", i + 1, 1, path) from None


def _expect_int(tok: str, line: int, col: int, path, what: str) -> int:
    if not _INT.match(tok):
        raise FormatError(f"{what} must be an integer, got {tok!r}", line, col, path)
    return int(tok)


def loads_dataset(data: bytes, path: Optional[str] = None) -> SyndromeDataset:
    if not data.endswith(b"\n"):
        last = data.rsplit(b"\n", 1)[-1]
        raise FormatError("file must end with a newline", data.count(b"\n") + 1, len(last) + 1, path)
    lines = data.split(b"\n")[:-1]
    if _header_line(lines, 0, path) != DATASET_MAGIC:
        raise FormatError(f"expected {DATASET_MAGIC!r}", 1, 1, path)
    toks = _header_line(lines, 1, path).split(" ")
    if len(toks) != 2 or toks[0] != "detectors":
        raise FormatError("expected 'detectors <n>'", 2, 1, path)
    n = _expect_int(toks[1], 2, 11, path, "detector count")
    if n < 1:
        raise FormatError("detector count must be positive", 2, 11, path)
    dets, seen = [], set()
    for k in range(n):
        ln = 3 + k
        toks = _header_line(lines, ln - 1, path).split(" ")
        if len(toks) != 3 or toks[0] != "det":
            raise FormatError("expected 'det <ancilla> <tick>'", ln, 1, path)
        if not _NAME.match(toks[1]):
            raise FormatError(f"bad ancilla id {toks[1]!r}", ln, 5, path)
        tick = _expect_int(toks[2], ln, 6 + len(toks[1]), path, "tick")
        d = DetectorCoord(toks[1], tick)
        if d in seen:
            raise FormatError(f"duplicate detector {toks[1]} {tick}", ln, 1, path)
        seen.add(d)
        dets.append(d)
    i = 2 + n
    truth = False
    line = _header_line(lines, i, path)
    if line == "truth xz":
        truth = True
        i += 1
        line = _header_line(lines, i, path)
    toks = line.split(" ")
    if len(toks) != 2 or toks[0] != "shots":
        raise FormatError("expected 'shots <m>'", i + 1, 1, path)
    m = _expect_int(toks[1], i + 1, 7, path, "shot count")
    if m < 1:
        raise FormatError("shot count must be positive", i + 1, 7, path)
    first = i + 1
    body = lines[first:]
    if len(body) != m:
        raise FormatError(f"expected {m} shot lines, found {len(body)}", first + min(len(body), m) + 1, 1, path)
    width = n + (3 if truth else 0)
    bad_len = [j for j, b in enumerate(body) if len(b) != width]
    if bad_len:
        j = bad_len[0]
        raise FormatError(f"shot line has width {len(body[j])}, expected {width}", first + j + 1,
                          min(len(body[j]), width) + 1, path)
    arr = np.frombuffer(b"".join(body), dtype=np.uint8).reshape(m, width)
    bits = arr[:, :n]
    ok = (bits == ord("0")) | (bits == ord("1"))
    if truth:
        ok = np.concatenate([ok, (arr[:, n:n + 1] == ord(" ")),
                             (arr[:, n + 1:] == ord("0")) | (arr[:, n + 1:] == ord("1"))], axis=1)
    if not ok.all():
        r, c = np.argwhere(~ok)[0]
        raise FormatError(f"unexpected character {chr(arr[r, c])!r}", first + int(r) + 1, int(c) + 1, path)
    tr = (arr[:, n + 1:] - ord("0")).astype(np.uint8) if truth else None
    return SyndromeDataset.from_bits(dets, bits - ord("0"), tr, {"source": path or "<bytes>"})


def write_dataset(path, ds: SyndromeDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_dataset(ds))


def read_dataset(path) -> SyndromeDataset:
    with open(path, "rb") as fh:
        return loads_dataset(fh.read(), str(path))


# ---------------------------------------------------------------------------
# Models


@dataclass
class ModelRecord:
    detectors: Tuple[DetectorCoord, ...]
    p: float
    stderr: Optional[float]
    cls: str = "Unclassified"
    logical_flip_x: bool = False
    logical_flip_z: bool = False


@dataclass
class ModelFileV1:
    records: List[ModelRecord]
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: (len(r.detectors),
                                                           [detector_sort_key(d) for d in r.detectors]))

    # conversions

    @classmethod
    def from_model(cls, model: InferredModel, schedule: Optional[CircuitSchedule] = None,
                   catalog: Optional[FaultCatalog] = None) -> "ModelFileV1":
        flips = _flip_lookup(model, schedule, catalog)
        recs = []
        for key, e in model.items():
            label = "Unclassified"
            if schedule is not None:
                label = classify_signature(key, schedule.layout, schedule, catalog).value
            fx, fz = flips(key)
            recs.append(ModelRecord(tuple(key), float(e.p), e.stderr, label, fx, fz))
        meta = {"support_hash": model.metadata.get("support_hash"),
                "shots": model.metadata.get("shots"),
                "cycle_averaged": bool(model.metadata.get("cycle_averaged", False))}
        return cls(recs, meta)

    def to_model(self) -> InferredModel:
        entries = {}
        for r in self.records:
            flags = ("negative",) if r.p < 0 else ()
            entries[r.detectors] = ModelEntry(r.p, r.stderr, flags)
        return InferredModel(entries, dict(self.metadata))

    def channels(self) -> List[SignatureChannel]:
        """Signature channels with p > 0 (negative and NaN estimates dropped)."""
        return [SignatureChannel(ErrorSignature(r.detectors, r.logical_flip_x, r.logical_flip_z), r.p)
                for r in self.records if math.isfinite(r.p) and r.p > 0]

    # text

    def dumps(self) -> str:
        ents = []
        for r in self.records:
            ents.append({"detectors": [[d.ancilla, d.tick] for d in r.detectors],
                         "p": _num(r.p), "stderr": _num(r.stderr), "class": r.cls,
                         "logical_flip_x": bool(r.logical_flip_x), "logical_flip_z": bool(r.logical_flip_z)})
        doc = {"format": MODEL_FORMAT, "metadata": self.metadata, "entries": ents}
        return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text: str, path: Optional[str] = None) -> "ModelFileV1":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(exc.msg, exc.lineno, exc.colno, path) from None
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
            raise FormatError(f"not a {MODEL_FORMAT!r} document", 1, 1, path)
        meta = doc.get("metadata", {})
        if not isinstance(meta, dict):
            raise FormatError("metadata must be an object", 1, 1, path)
        recs = []
        ents = doc.get("entries")
        if not isinstance(ents, list):
            raise FormatError("entries must be a list", 1, 1, path)
        for i, e in enumerate(ents):
            try:
                dets = canonical_detectors((str(a), int(t)) for a, t in e["detectors"])
                if len(dets) != len(e["detectors"]):
                    raise ValueError("repeated detector")
                p = float("nan") if e["p"] is None else float(e["p"])
                se = None if e.get("stderr") is None else float(e["stderr"])
                recs.append(ModelRecord(dets, p, se, str(e.get("class", "Unclassified")),
                                        bool(e.get("logical_flip_x", False)), bool(e.get("logical_flip_z", False))))
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"entry {i}: {exc}", _entry_line(text, i), 1, path) from None
        return cls(recs, meta)


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _entry_line(text: str, i: int) -> int:
    """Line of the i-th entry object in our indented layout (best effort)."""
    count = -1
    for n, line in enumerate(text.splitlines(), 1):
        if line.startswith("  {"):
            count += 1
            if count == i:
                return n
    return 1


def _flip_lookup(model: InferredModel, schedule: Optional[CircuitSchedule], catalog: Optional[FaultCatalog]):
    if schedule is None:
        return lambda key: (False, False)
    if model.metadata.get("cycle_averaged"):
        from .code_model import enumerate_fault_catalog
        cat = catalog if catalog is not None else enumerate_fault_catalog(schedule)

        def f(key):
            ents = cat.lookup(key)
            if not ents:
                return False, False
            n = len(ents)
            return (2 * sum(e.signature.logical_flip_x for e in ents) > n,
                    2 * sum(e.signature.logical_flip_z for e in ents) > n)
        return f
    from .matching_graph import fault_signatures
    table = fault_signatures(schedule)
    return lambda key: tuple(table.get(tuple(key), (False, False)))


def write_model(path, mf: ModelFileV1) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(mf.dumps())


def read_model(path) -> ModelFileV1:
    with open(path, "r", newline="") as fh:
        return ModelFileV1.loads(fh.read(), str(path))
