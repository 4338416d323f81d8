"""Instance serialization.

Two self-describing containers hold the same content (params, seed, sorted
edge list or Gaussian matrix, ``B`` in row-major order, ``v``, ``u``):

* ``json``: one JSON object, arrays as nested or flat lists;
* ``bin``: the magic line ``CSBM-INSTANCE 1``, an 8-byte little-endian
  header length, a JSON header describing every array (dtype, shape,
  offset), then the raw little-endian array bytes.

Both writers are byte-deterministic.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import GaussianInstance, Graph, Instance, Latents, derive_params

FORMAT_TAG = "csbm-instance v1"
MAGIC = b"CSBM-INSTANCE 1\n"


def _arrays(inst) -> dict:
    out = {}
    if isinstance(inst, Instance):
        out["edges"] = np.ascontiguousarray(inst.graph.edges, dtype="<i8")
    elif isinstance(inst, GaussianInstance):
        out["matrix_a"] = np.ascontiguousarray(inst.matrix_a, dtype="<f8")
    else:
        raise TypeError(f"cannot serialize {type(inst).__name__}")
    out["covariates"] = np.ascontiguousarray(inst.covariates, dtype="<f8")
    out["v"] = np.ascontiguousarray(inst.truth.v, dtype="i1")
    out["u"] = np.ascontiguousarray(inst.truth.u, dtype="<f8")
    return out


def _meta(inst) -> dict:
    return {
        "format": FORMAT_TAG,
        "model": "sbm" if isinstance(inst, Instance) else "gaussian",
        "params": inst.params.as_dict(),
        "gamma": inst.params.gamma,
        "seed": int(inst.seed),
    }


def _build(meta: dict, arrays: dict):
    prm = meta["params"]
    model = meta["model"]
    params = derive_params(prm["n"], prm["p"], prm["d"], prm["lambda"], prm["mu"],
                           check_graph=model == "sbm")
    truth = Latents(np.asarray(arrays["v"], dtype=np.int8), np.asarray(arrays["u"], dtype=np.float64))
    B = np.asarray(arrays["covariates"], dtype=np.float64).reshape(params.p, params.n)
    if model == "sbm":
        edges = np.asarray(arrays["edges"], dtype=np.int64).reshape(-1, 2)
        return Instance(Graph(params.n, edges), B, truth, params, int(meta["seed"]))
    if model == "gaussian":
        A = np.asarray(arrays["matrix_a"], dtype=np.float64).reshape(params.n, params.n)
        return GaussianInstance(A, B, truth, params, int(meta["seed"]))
    raise ValueError(f"unknown model {model!r}")


def to_json(inst) -> str:
    doc = _meta(inst)
    for name, arr in _arrays(inst).items():
        doc[name] = {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
    return json.dumps(doc, separators=(",", ":"))


def from_json(text: str):
    doc = json.loads(text)
    if doc.get("format") != FORMAT_TAG:
        raise ValueError(f"not a {FORMAT_TAG} document")
    names = [k for k in ("edges", "matrix_a", "covariates", "v", "u") if k in doc]
    arrays = {k: np.asarray(doc[k]["data"]).reshape(doc[k]["shape"]) for k in names}
    return _build(doc, arrays)


def to_bytes(inst) -> bytes:
    arrays = _arrays(inst)
    header = _meta(inst)
    layout, offset = {}, 0
    for name, arr in arrays.items():
        layout[name] = {"dtype": arr.dtype.str, "shape": list(arr.shape), "offset": offset}
        offset += arr.nbytes
    header["arrays"] = layout
    hb = json.dumps(header, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<Q", len(hb)) + hb + b"".join(a.tobytes() for a in arrays.values())


def from_bytes(data: bytes):
    if not data.startswith(MAGIC):
        raise ValueError("not a csbm binary instance")
    pos = len(MAGIC)
    (hlen,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    header = json.loads(data[pos:pos + hlen])
    body = memoryview(data)[pos + hlen:]
    arrays = {}
    for name, spec in header["arrays"].items():
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"], dtype=np.int64))
        arrays[name] = np.frombuffer(body, dtype=dt, count=count, offset=spec["offset"]).reshape(spec["shape"]).copy()
    return _build(header, arrays)


def save(inst, path, fmt: str = "json") -> None:
    path = Path(path)
    if fmt == "json":
        path.write_text(to_json(inst))
    elif fmt == "bin":
        path.write_bytes(to_bytes(inst))
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load(path):
    """Read either container; the format is recognised from the content."""
    data = Path(path).read_bytes()
    if data.startswith(MAGIC):
        return from_bytes(data)
    return from_json(data.decode())
