"""On-disk formats for trained stages and stage stacks.

Stage files use a small versioned binary container (all little-endian)::

    b"MLSM"            magic
    u8                 container version (1)
    u32                number of entries
    per entry:
      u16 + bytes      entry name (UTF-8)
      u8               kind: 0 = float64 array, 1 = int64 array, 2 = UTF-8 text
      u8               ndim (arrays only)
      u32 * ndim       shape (arrays only)
      u32 + bytes      text payload, or the raw array payload in C order

Entries are written in a fixed order, so saving the same model twice yields
identical bytes. A stack directory holds ``stage_XXX.mlsm`` per stage,
``manifest.json`` (stage order, epsilon chain, time grid, seed, resolved
config, wall times) and ``losses.csv``.
"""

import csv
import json
import os
import struct

import numpy as np

from .autoencoder import AutoencoderPair, MlpNetwork
from .errors import FormatError
from .gp_interp import GpCoefficientField, Kernel
from .rom import StageConfig, StageModel, StageStack

MAGIC = b"MLSM"
VERSION = 1
_F8, _I8, _TEXT = 0, 1, 2


def write_container(path, entries):
    """Write ``entries`` (name -> array or str) in insertion order."""
    chunks = [MAGIC, struct.pack("<BI", VERSION, len(entries))]
    for name, value in entries.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        if isinstance(value, str):
            text = value.encode("utf-8")
            chunks.append(struct.pack("<BI", _TEXT, len(text)) + text)
            continue
        arr = np.asarray(value)
        kind = _I8 if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool else _F8
        # asarray + C-order copy keeps 0-d scalars 0-d (ascontiguousarray would not)
        arr = np.array(arr, dtype="<i8" if kind == _I8 else "<f8", order="C")
        chunks.append(struct.pack("<BB", kind, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))
        fh.flush()
        os.fsync(fh.fileno())


def read_container(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a stage model file")
    try:
        version, count = struct.unpack_from("<BI", blob, 4)
        if version != VERSION:
            raise FormatError(f"{path}: unsupported container version {version}")
        pos = 9
        entries = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", blob, pos)
            name = blob[pos + 2:pos + 2 + n].decode("utf-8")
            pos += 2 + n
            kind = blob[pos]
            if kind == _TEXT:
                (size,) = struct.unpack_from("<I", blob, pos + 1)
                entries[name] = blob[pos + 5:pos + 5 + size].decode("utf-8")
                pos += 5 + size
                continue
            ndim = blob[pos + 1]
            shape = struct.unpack_from(f"<{ndim}I", blob, pos + 2)
            pos += 2 + 4 * ndim
            count_items = int(np.prod(shape, dtype=np.int64))
            dtype = "<i8" if kind == _I8 else "<f8"
            arr = np.frombuffer(blob, dtype, count_items, pos).reshape(shape)
            entries[name] = arr.copy()
            pos += 8 * count_items
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: corrupt stage file ({exc})") from exc
    if pos != len(blob):
        raise FormatError(f"{path}: trailing bytes after last entry")
    return entries


def stage_entries(stage):
    ae = stage.autoencoder
    e = {
        "layer_dims": np.array(ae.layer_dims, dtype=np.int64),
        "activation": ae.activation,
    }
    for prefix, net in (("encoder", ae.encoder), ("decoder", ae.decoder)):
        for i, (W, b) in enumerate(zip(net.weights, net.biases)):
            e[f"{prefix}.W{i}"] = W
            e[f"{prefix}.b{i}"] = b
    gp = stage.gp_field
    e.update({
        "input_mean": ae.input_mean,
        "input_scale": np.float64(ae.input_scale),
        "output_mean": ae.output_mean,
        "output_scale": np.float64(ae.output_scale),
        "coefficients": stage.coefficients,
        "parameters": stage.parameters,
        "epsilon_prev": np.float64(stage.epsilon_prev),
        "gp.kind": gp.kind,
        "gp.amplitude": np.array([k.amplitude for k in gp.kernels]),
        "gp.lengthscale": np.array([k.lengthscale for k in gp.kernels]),
        "gp.noise": np.array([k.noise for k in gp.kernels]),
        "gp.degenerate": gp.degenerate.astype(np.int64),
        "config": json.dumps(stage.config.to_dict() if stage.config else {}, sort_keys=True),
        "loss_history": np.array(stage.loss_history, dtype=np.float64).reshape(-1, 5),
    })
    return e


def save_stage(stage, path):
    write_container(path, stage_entries(stage))


def load_stage(path):
    e = read_container(path)
    dims = tuple(int(d) for d in e["layer_dims"])
    act = e["activation"]
    nets = []
    for prefix, layout in (("encoder", dims), ("decoder", dims[::-1])):
        n = len(layout) - 1
        nets.append(MlpNetwork(layout, [e[f"{prefix}.W{i}"] for i in range(n)],
                               [e[f"{prefix}.b{i}"] for i in range(n)], act))
    ae = AutoencoderPair(nets[0], nets[1], e["input_mean"], float(e["input_scale"]),
                         e["output_mean"], float(e["output_scale"]))
    kind = e["gp.kind"]
    kernels = [Kernel(kind, float(a), float(l), float(s)) for a, l, s in
               zip(e["gp.amplitude"], e["gp.lengthscale"], e["gp.noise"])]
    gp = GpCoefficientField(e["parameters"], e["coefficients"], kind,
                            kernels=kernels, degenerate=e["gp.degenerate"])
    cfg = json.loads(e["config"])
    config = StageConfig(**cfg) if cfg else None
    history = [tuple([int(r[0])] + [float(v) for v in r[1:]]) for r in e["loss_history"]]
    return StageModel(ae, e["coefficients"], e["parameters"], gp,
                      float(e["epsilon_prev"]), config, history)


def write_losses_csv(stack, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "iteration", "total", "ae", "di", "ridge"])
        for k, stage in enumerate(stack.stages):
            for it, *vals in stage.loss_history:
                w.writerow([k, int(it)] + [repr(float(v)) for v in vals])


def save_stack(stack, directory, config_echo=None):
    os.makedirs(directory, exist_ok=True)
    names = []
    for k, stage in enumerate(stack.stages):
        name = f"stage_{k:03d}.mlsm"
        save_stage(stage, os.path.join(directory, name))
        names.append(name)
    write_losses_csv(stack, os.path.join(directory, "losses.csv"))
    manifest = {
        "format": "mlasdi-stack",
        "version": 1,
        "stages": names,
        "epsilons": [s.epsilon_prev for s in stack.stages],
        "t0": stack.t0,
        "dt": stack.dt,
        "n_times": stack.n_times,
        "seed": stack.seed,
        "wall_times": [s.wall_time for s in stack.stages],
        "config": config_echo,
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(directory):
    path = os.path.join(directory, "manifest.json")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "mlasdi-stack":
        raise FormatError(f"{path}: not a stage stack manifest")
    return manifest


def load_stack(directory):
    manifest = load_manifest(directory)
    stages = [load_stage(os.path.join(directory, n)) for n in manifest["stages"]]
    for stage, wall in zip(stages, manifest.get("wall_times", [])):
        stage.wall_time = wall
    return StageStack(stages, stages[0].parameters, manifest["t0"], manifest["dt"],
                      manifest["n_times"], manifest.get("seed", 0))
