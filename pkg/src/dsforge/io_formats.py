"""Generator file formats: sorted-key JSON and the little-endian ``DSH1`` binary."""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"DSH1"


def lane_records(lazy):
    recs = []
    for i, (comp, edge) in enumerate(lazy.provenance):
        lane = lazy.cochain.lane(i)
        recs.append({
            "component": int(comp),
            "closing_edge": int(edge),
            "support": [[int(c), int(v)] for c, v in zip(lane.cells, lane.coeffs[:, 0])],
        })
    return recs


def basis_record(selection):
    gens = []
    for k in range(selection.rank):
        lane = selection.cochain.lane(k)
        gens.append({"support": [[int(c), int(v)] for c, v in zip(lane.cells, lane.coeffs[:, 0])]})
    return {
        "rank": int(selection.rank),
        "combination": [[int(x) for x in row] for row in np.asarray(selection.combination).tolist()],
        "generators": gens,
    }


def dumps(obj):
    """Canonical JSON text: sorted keys, compact separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def generators_document(lazy, selection=None):
    doc = {"lanes": lane_records(lazy)}
    if selection is not None:
        doc["basis"] = basis_record(selection)
    return doc


def write_generators_json(path, lazy, selection=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(generators_document(lazy, selection)))


def read_generators_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def encode_binary(records):
    out = [MAGIC, struct.pack("<Q", len(records))]
    for r in records:
        sup = np.asarray(r["support"], dtype="<i8").reshape(-1, 2)
        out.append(struct.pack("<QQQ", r["component"], r["closing_edge"], sup.shape[0]))
        out.append(sup.tobytes())
    return b"".join(out)


def decode_binary(data):
    if data[:4] != MAGIC:
        raise ValueError("not a DSH1 generator file")
    (n,) = struct.unpack_from("<Q", data, 4)
    pos = 12
    recs = []
    for _ in range(n):
        comp, edge, k = struct.unpack_from("<QQQ", data, pos)
        pos += 24
        sup = np.frombuffer(data, dtype="<i8", count=2 * k, offset=pos).reshape(-1, 2)
        pos += 16 * k
        recs.append({"component": comp, "closing_edge": edge, "support": sup.tolist()})
    if pos != len(data):
        raise ValueError("trailing bytes in DSH1 file")
    return {"lanes": recs}


def write_generators_binary(path, lazy):
    with open(path, "wb") as fh:
        fh.write(encode_binary(lane_records(lazy)))


def read_generators(path):
    """Read either format (detected by the magic bytes)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == MAGIC:
        return decode_binary(data)
    return json.loads(data.decode("utf-8"))


def cochain_from_records(records, n_edges=None):
    """Multi-lane 1-cochain from generator records."""
    from .complex import Cochain
    lanes = len(records)
    cells, vals, lane_idx = [], [], []
    for i, r in enumerate(records):
        for e, c in r["support"]:
            cells.append(int(e))
            vals.append(int(c))
            lane_idx.append(i)
    coeffs = np.zeros((len(cells), lanes), dtype=np.int64)
    coeffs[np.arange(len(cells)), lane_idx] = vals
    return Cochain(1, np.asarray(cells, dtype=np.int64), coeffs, lanes=lanes)
