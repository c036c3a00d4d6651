"""Versioned checkpoint container shared by all models.

A checkpoint is an .npz holding every named parameter and its optimizer
accumulator plus a JSON metadata blob (format version, model kind, dtype,
vocabulary hash, RNG seed, architecture fields).
"""

import json

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path, params, accum, meta):
    payload = {}
    for name, arr in params.items():
        payload["param/" + name] = arr
    for name, arr in accum.items():
        payload["accum/" + name] = arr
    full_meta = {"format_version": FORMAT_VERSION, "dtype": "float64"}
    full_meta.update(meta)
    payload["__meta__"] = np.frombuffer(
        json.dumps(full_meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path):
    """Returns (params, accum, meta); raises ValueError on unknown versions."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format: {meta.get('format_version')}")
        params = {}
        accum = {}
        for key in data.files:
            if key.startswith("param/"):
                params[key[len("param/") :]] = data[key]
            elif key.startswith("accum/"):
                accum[key[len("accum/") :]] = data[key]
    return params, accum, meta
