"""JSON file formats: models, data sets, explanations.

Floats are written with 17 significant digits so every file round-trips
bit-exactly, and output is byte-stable for identical inputs.
"""
import json
import math
from pathlib import Path

import numpy as np

from .errors import ModelFormatError
from .runtime import LAYER_KINDS, Network


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            raise ValueError("cannot serialize non-finite number")
        s = format(v, ".17g")
        if "e" not in s and "." not in s and "n" not in s:
            s += ".0"
        return s
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, np.ndarray):
        return _fmt(v.tolist())
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(val)}" for k, val in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj):
    """Deterministic JSON with top-level keys (or list items) one per line."""
    if isinstance(obj, dict):
        body = ",\n".join(f"  {json.dumps(str(k))}: {_fmt(v)}" for k, v in obj.items())
        return "{\n" + body + "\n}\n"
    if isinstance(obj, (list, tuple)):
        return "[\n" + ",\n".join("  " + _fmt(v) for v in obj) + "\n]\n"
    return _fmt(obj) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# --- models -----------------------------------------------------------------

def _floats(entry, key, index, required=True):
    if key not in entry or entry[key] is None:
        if required:
            raise ModelFormatError("missing", layer=index, field=key)
        return None
    vals = entry[key]
    if not isinstance(vals, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        raise ModelFormatError("expected a flat list of numbers", layer=index, field=key)
    arr = np.array(vals, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ModelFormatError("non-finite value", layer=index, field=key)
    return arr


def _int(entry, key, index, default):
    v = entry.get(key, default)
    if isinstance(v, list) and len(v) == 2 and v[0] == v[1]:
        v = v[0]
    if not isinstance(v, int) or isinstance(v, bool):
        raise ModelFormatError("expected an integer", layer=index, field=key)
    return v


def _build_layer(entry, index, in_shape):
    if not isinstance(entry, dict):
        raise ModelFormatError("layer entry must be an object", layer=index)
    kind = entry.get("kind")
    cls = LAYER_KINDS.get(kind)
    if cls is None:
        raise ModelFormatError(f"unknown kind {kind!r}", layer=index, field="kind")
    if kind in ("Dense", "SoftMinHead"):
        W = _floats(entry, "W", index)
        n_in = int(np.prod(in_shape))
        if len(in_shape) != 1 or W.size % n_in:
            raise ModelFormatError(f"weight length {W.size} does not match input size {n_in}",
                                   layer=index, field="W")
        n_out = W.size // n_in
        b = _floats(entry, "b", index, required=False)
        if b is not None and b.size != n_out:
            raise ModelFormatError(f"bias length {b.size} != {n_out} outputs", layer=index, field="b")
        kw = {"beta": entry.get("beta", 1.0)} if kind == "SoftMinHead" else {}
        return cls(W.reshape(n_out, n_in), b, **kw)
    if kind == "Conv2D":
        W = _floats(entry, "W", index)
        kernel = entry.get("kernel")
        if isinstance(kernel, int):
            kernel = [kernel, kernel]
        if not (isinstance(kernel, list) and len(kernel) == 2 and all(isinstance(k, int) and k > 0 for k in kernel)):
            raise ModelFormatError("expected [kh, kw]", layer=index, field="kernel")
        if len(in_shape) != 3:
            raise ModelFormatError(f"Conv2D needs (C, H, W) input, got {tuple(in_shape)}", layer=index, field="W")
        per_out = in_shape[0] * kernel[0] * kernel[1]
        if W.size % per_out:
            raise ModelFormatError(f"weight length {W.size} not a multiple of {per_out}", layer=index, field="W")
        n_out = W.size // per_out
        b = _floats(entry, "b", index, required=False)
        if b is not None and b.size != n_out:
            raise ModelFormatError(f"bias length {b.size} != {n_out} channels", layer=index, field="b")
        return cls(W.reshape(n_out, in_shape[0], *kernel), b,
                   stride=_int(entry, "stride", index, 1), pad=_int(entry, "pad", index, 0))
    if kind in ("MaxPool2D", "AvgPool2D"):
        size = _int(entry, "kernel", index, 2)
        return cls(size=size, stride=_int(entry, "stride", index, size))
    if kind == "LogSumExpPool":
        groups = entry.get("groups")
        if not isinstance(groups, list):
            raise ModelFormatError("expected a list of index lists", layer=index, field="groups")
        return cls(groups=groups, sign=_int(entry, "sign", index, 1), beta=entry.get("beta", 1.0))
    return cls()


def model_from_dict(doc):
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be an object")
    shape = doc.get("input_shape")
    if not (isinstance(shape, list) and shape and all(isinstance(s, int) and s > 0 for s in shape)):
        raise ModelFormatError("expected a list of positive integers", field="input_shape")
    entries = doc.get("layers")
    if not isinstance(entries, list) or not entries:
        raise ModelFormatError("expected a non-empty list", field="layers")
    layers = []
    in_shape = tuple(shape)
    for i, entry in enumerate(entries):
        try:
            layer = _build_layer(entry, i, in_shape)
            in_shape = tuple(layer.output_shape(in_shape))
        except ModelFormatError as exc:
            if exc.layer is None:
                raise ModelFormatError(str(exc), layer=i, field=exc.field) from None
            raise
        layers.append(layer)
    return Network(tuple(layers), tuple(shape), name=str(doc.get("name", "")),
                   labels=tuple(doc.get("labels", [])))


def model_to_dict(net):
    doc = {"input_shape": list(net.input_shape), "layers": [layer.to_dict() for layer in net.layers],
           "labels": list(net.labels)}
    if net.name:
        doc = {"name": net.name, **doc}
    return doc


def load_model(path):
    try:
        doc = read_json(path)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}") from None
    return model_from_dict(doc)


def save_model(net, path):
    write_json(path, model_to_dict(net))


# --- data -------------------------------------------------------------------

def load_data(path):
    """Returns a list of ``(x, label)`` pairs; ``x`` is reshaped to its declared shape."""
    doc = read_json(path)
    if isinstance(doc, dict):
        doc = [doc]
    samples = []
    for n, item in enumerate(doc):
        if not isinstance(item, dict) or "x" not in item:
            raise ModelFormatError(f"sample {n}: expected an object with 'x'")
        x = np.array(item["x"], dtype=np.float64)
        shape = item.get("shape", [x.size])
        if int(np.prod(shape)) != x.size:
            raise ModelFormatError(f"sample {n}: shape {shape} does not match {x.size} values", field="shape")
        samples.append((x.reshape(shape), item.get("label")))
    return samples


def save_data(samples, path):
    doc = []
    for x, label in samples:
        x = np.asarray(x, dtype=np.float64)
        item = {"x": x.ravel().tolist(), "shape": list(x.shape)}
        if label is not None:
            item["label"] = label
        doc.append(item)
    write_json(path, doc)
