"""Versioned model checkpoints: text manifest plus named float64 tensors.

The manifest is a JSON block with the structural description (layer sizes,
head kind, regimes, normalization stats, optimizer state) and a tensor
table; the binary section holds the tensors row-major as little-endian
64-bit floats in table order.  No timestamps or environment data: saving
the same model twice produces byte-identical files.
"""

import json
from pathlib import Path

import numpy as np

from ..dataset import NormStats
from ..errors import ConfigurationError
from .adam import AdamState
from .layers import DenseParams, GruLayerParams, LinearHead, RegimeBank
from .network import ModelParams

CHECKPOINT_MAGIC = "pnident-checkpoint 1"


def save_model(path, params: ModelParams, adam: AdamState = None):
    tensors = list(params.named_tensors())
    if adam is not None:
        for name, _ in params.named_tensors():
            tensors.append((f"adam.m.{name}", adam.m[name]))
            tensors.append((f"adam.v.{name}", adam.v[name]))

    manifest = {
        "format": CHECKPOINT_MAGIC,
        "head_kind": params.head_kind,
        "n_layers": len(params.layers),
        "n_features": params.n_features,
        "max_steps": params.max_steps,
        "dtype": np.dtype(params.dtype).name,
        "stats": params.stats.to_dict(),
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in tensors],
    }
    if isinstance(params.head, RegimeBank):
        manifest["regimes"] = [lam.tolist() for lam in params.head.regimes]
    if adam is not None:
        manifest["optimizer"] = {
            "step": adam.step,
            "base_rate": adam.base_rate,
            "decay": adam.decay,
            "decay_every": adam.decay_every,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "eps": adam.eps,
        }

    text = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    with open(Path(path), "wb") as fh:
        fh.write((CHECKPOINT_MAGIC + "\n").encode())
        fh.write(f"{len(text)}\n".encode())
        fh.write(text.encode())
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path):
    """Returns (params, adam or None); every tensor shape is validated."""
    with open(Path(path), "rb") as fh:
        magic = fh.readline().decode().strip()
        if magic != CHECKPOINT_MAGIC:
            raise ConfigurationError(f"not a checkpoint file (magic {magic!r})")
        length = int(fh.readline().decode().strip())
        manifest = json.loads(fh.read(length).decode())
        payload = fh.read()

    dtype = np.dtype(manifest["dtype"])
    raw = np.frombuffer(payload, dtype="<f8")
    tensors = {}
    offset = 0
    for rec in manifest["tensors"]:
        shape = tuple(rec["shape"])
        size = int(np.prod(shape)) if shape else 1
        if offset + size > raw.size:
            raise ConfigurationError("checkpoint payload shorter than its manifest")
        tensors[rec["name"]] = (
            raw[offset:offset + size].reshape(shape).astype(dtype)
        )
        offset += size
    if offset != raw.size:
        raise ConfigurationError("checkpoint payload longer than its manifest")

    def take(name, *shape):
        if name not in tensors:
            raise ConfigurationError(f"checkpoint is missing tensor {name}")
        arr = tensors[name]
        if shape and arr.shape != shape:
            raise ConfigurationError(
                f"tensor {name} has shape {arr.shape}, expected {shape}"
            )
        return arr

    stats = NormStats.from_dict(manifest["stats"])
    n_features = manifest["n_features"]
    dense_w = take("input.w")
    hidden = dense_w.shape[0]
    if dense_w.shape != (hidden, n_features):
        raise ConfigurationError("input layer shape disagrees with manifest")
    dense = DenseParams(w=dense_w, b=take("input.b", hidden))

    layers = []
    width = hidden
    for i in range(manifest["n_layers"]):
        fields = {}
        for name in GruLayerParams.tensor_names():
            full = f"gru{i}.{name}"
            if name.startswith("w_h"):
                fields[name] = take(full, hidden, hidden)
            elif name.startswith("w_x"):
                fields[name] = take(full, hidden, width)
            else:
                fields[name] = take(full, hidden)
        layers.append(GruLayerParams(**fields))
        width = hidden

    if manifest["head_kind"] == "regime":
        regimes = tuple(
            np.asarray(lam, dtype=dtype) for lam in manifest["regimes"]
        )
        head = RegimeBank(
            regimes=regimes,
            weights=tuple(
                take(f"head.g{g}.w", len(lam), hidden)
                for g, lam in enumerate(regimes)
            ),
            biases=tuple(
                take(f"head.g{g}.b", len(lam)) for g, lam in enumerate(regimes)
            ),
        )
    else:
        head = LinearHead(w=take("head.w"), b=take("head.b"))

    params = ModelParams(
        input=dense, layers=tuple(layers), head=head, stats=stats,
        max_steps=manifest["max_steps"],
    )

    adam = None
    if "optimizer" in manifest:
        opt = manifest["optimizer"]
        adam = AdamState(
            m={n: tensors[f"adam.m.{n}"] for n, _ in params.named_tensors()},
            v={n: tensors[f"adam.v.{n}"] for n, _ in params.named_tensors()},
            step=opt["step"],
            base_rate=opt["base_rate"],
            decay=opt["decay"],
            decay_every=opt["decay_every"],
            beta1=opt["beta1"],
            beta2=opt["beta2"],
            eps=opt["eps"],
        )
    return params, adam
