"""Self-describing model documents with bit-exact floating-point payloads.

Every array is stored as ``{"shape": [...], "hex": [float.hex(x), ...]}`` so
a save/load round trip reproduces every bit. Supported kinds are
``topo_network``, ``deeponet``, ``ridge1d`` and ``separable_expansion``.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..constructive.separable import SeparableExpansion
from ..deeponet import BranchNetwork, TopologicalDeepONet, TrunkNetwork
from ..errors import RejectedInputError
from ..ridge1d import Ridge1DExpansion
from ..spaces import MeasurementSpace
from ..toponet import FunctionalLayer, TopoNetwork

__all__ = ["FORMAT", "VERSION", "to_document", "from_document", "save_model", "load_model", "write_atomic",
           "encode_array", "decode_array"]

FORMAT = "topodeeponet-model"
VERSION = 1


def encode_array(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "hex": [float(x).hex() for x in a.ravel()]}


def decode_array(d):
    flat = np.array([float.fromhex(x) for x in d["hex"]], dtype=float)
    return flat.reshape(d["shape"])


def _enc_float(x):
    return float(x).hex()


def _dec_float(s):
    return float.fromhex(s)


def _network_doc(net: TopoNetwork):
    return {
        "activation": net.activation.value,
        "functional_weights": encode_array(net.layer.weights),
        "biases": encode_array(net.layer.biases),
        "hidden": [{"matrix": encode_array(a), "bias": encode_array(b)} for a, b in net.hidden],
        "output": encode_array(net.output),
    }


def _network(doc, space):
    layer = FunctionalLayer(space, decode_array(doc["functional_weights"]), decode_array(doc["biases"]))
    hidden = tuple((decode_array(h["matrix"]), decode_array(h["bias"])) for h in doc["hidden"])
    return TopoNetwork(layer, decode_array(doc["output"]), hidden, doc["activation"])


def _trunk_doc(t: TrunkNetwork):
    return {"activation": t.activation.value, "omegas": encode_array(t.omegas), "zetas": encode_array(t.zetas),
            "mixing": None if t.mixing is None else encode_array(t.mixing)}


def _trunk(doc):
    mixing = None if doc["mixing"] is None else decode_array(doc["mixing"])
    return TrunkNetwork(decode_array(doc["omegas"]), decode_array(doc["zetas"]), doc["activation"], mixing)


def _domain_doc(domain):
    return [encode_array(domain[0]), encode_array(domain[1])]


def _domain(doc):
    return decode_array(doc[0]), decode_array(doc[1])


def to_document(model) -> dict:
    head = {"format": FORMAT, "version": VERSION}
    if isinstance(model, TopoNetwork):
        return {**head, "kind": "topo_network", "space": model.space.describe(), "network": _network_doc(model)}
    if isinstance(model, TopologicalDeepONet):
        return {**head, "kind": "deeponet", "space": model.space.describe(),
                "branch": [_network_doc(c) for c in model.branch.columns],
                "trunk": _trunk_doc(model.trunk), "domain": _domain_doc(model.domain)}
    if isinstance(model, SeparableExpansion):
        return {**head, "kind": "separable_expansion", "space": model.space.describe(),
                "coeff_nets": [_network_doc(c) for c in model.coeff_nets],
                "trunk": _trunk_doc(model.trunk), "domain": _domain_doc(model.domain),
                "representatives": None if model.representatives is None else encode_array(model.representatives),
                "rep_coeffs": None if model.rep_coeffs is None else encode_array(model.rep_coeffs),
                "delta": _enc_float(model.delta), "seed": model.seed}
    if isinstance(model, Ridge1DExpansion):
        return {**head, "kind": "ridge1d", "activation": model.activation.value,
                "coeffs": encode_array(model.coeffs), "slopes": encode_array(model.slopes),
                "offsets": encode_array(model.offsets), "interval": [_enc_float(v) for v in model.interval]}
    raise RejectedInputError(f"cannot serialize {type(model).__name__}")


def from_document(doc: dict):
    if doc.get("format") != FORMAT:
        raise RejectedInputError("not a model document")
    if doc.get("version") != VERSION:
        raise RejectedInputError(f"unsupported model format version {doc.get('version')}")
    kind = doc["kind"]
    if kind == "ridge1d":
        return Ridge1DExpansion(doc["activation"], decode_array(doc["coeffs"]), decode_array(doc["slopes"]),
                                decode_array(doc["offsets"]), tuple(_dec_float(v) for v in doc["interval"]))
    space = MeasurementSpace.from_description(doc["space"])
    if kind == "topo_network":
        return _network(doc["network"], space)
    if kind == "deeponet":
        cols = tuple(_network(c, space) for c in doc["branch"])
        return TopologicalDeepONet(BranchNetwork(cols), _trunk(doc["trunk"]), _domain(doc["domain"]))
    if kind == "separable_expansion":
        nets = tuple(_network(c, space) for c in doc["coeff_nets"])
        reps = None if doc["representatives"] is None else decode_array(doc["representatives"])
        coeffs = None if doc["rep_coeffs"] is None else decode_array(doc["rep_coeffs"])
        return SeparableExpansion(_trunk(doc["trunk"]), nets, _domain(doc["domain"]), reps, coeffs,
                                  _dec_float(doc["delta"]), int(doc["seed"]))
    raise RejectedInputError(f"unknown model kind {kind!r}")


def write_atomic(path, text: str):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(path, model):
    write_atomic(path, json.dumps(to_document(model)))


def load_model(path):
    return from_document(json.loads(Path(path).read_text()))
