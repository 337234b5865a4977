"""Snapshot tensors, the analytic toy problem and the MLSD file format."""

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    FormatError,
    InvalidGrid,
    InvalidTensor,
    NonUniformTimeGrid,
    ShapeError,
)

MAGIC = b"MLSD"
VERSION = 1
# magic, version, N_mu, N_t+1, N_u, N, t0, dt
_HEADER = struct.Struct("<4sBIIIIdd")
HEADER_SIZE = _HEADER.size

TOY_X_RANGE = (-3.0, 3.0)
TOY_T_RANGE = (0.0, 2.0 * np.pi)


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SnapshotTensor:
    """Training tensor of shape ``(N_mu, N_t + 1, N_u)``.

    Times are stored as ``t0`` and a uniform step ``dt``; ``parameters`` has
    one row per parameter point.
    """

    parameters: np.ndarray
    values: np.ndarray
    t0: float
    dt: float

    def __post_init__(self):
        params = np.asarray(self.parameters, dtype=np.float64)
        if params.ndim == 1:
            params = params[:, None]
        values = np.asarray(self.values, dtype=np.float64)
        if params.ndim != 2 or params.shape[0] == 0 or params.shape[1] == 0:
            raise InvalidTensor("parameters must be a non-empty (N_mu, N) array")
        if values.ndim != 3 or values.shape[0] != params.shape[0]:
            raise InvalidTensor(
                f"values must be (N_mu, N_t+1, N_u) with N_mu={params.shape[0]}, "
                f"got {values.shape}"
            )
        if values.shape[1] < 1 or values.shape[2] < 1:
            raise InvalidTensor("values has an empty time or state axis")
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(params)):
            raise InvalidTensor("tensor contains non-finite entries")
        if len(np.unique(params, axis=0)) != params.shape[0]:
            raise InvalidTensor("parameter points must be pairwise distinct")
        if not (np.isfinite(self.dt) and self.dt > 0 and np.isfinite(self.t0)):
            raise NonUniformTimeGrid(f"invalid time grid t0={self.t0}, dt={self.dt}")
        object.__setattr__(self, "parameters", _frozen(params))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_times(cls, parameters, times, values):
        """Build a tensor from an explicit time grid, rejecting non-uniform ones."""
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise NonUniformTimeGrid("need at least two time points")
        steps = np.diff(times)
        dt = (times[-1] - times[0]) / (times.size - 1)
        if dt <= 0 or np.any(np.abs(steps - dt) > 1e-12 * dt):
            raise NonUniformTimeGrid("time grid is not uniform")
        return cls(parameters, values, times[0], dt)

    @property
    def n_params(self):
        return self.values.shape[0]

    @property
    def n_times(self):
        return self.values.shape[1]

    @property
    def state_dim(self):
        return self.values.shape[2]

    @property
    def param_dim(self):
        return self.parameters.shape[1]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_times)

    def subset(self, indices):
        indices = np.atleast_1d(indices)
        return SnapshotTensor(
            self.parameters[indices], self.values[indices], self.t0, self.dt
        )

    def with_values(self, values):
        return SnapshotTensor(self.parameters, values, self.t0, self.dt)


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: SnapshotTensor
    test: SnapshotTensor

    def __post_init__(self):
        a, b = self.train, self.test
        if a.n_times != b.n_times or a.state_dim != b.state_dim:
            raise InvalidTensor("train and test must share time grid and state_dim")
        if a.t0 != b.t0 or a.dt != b.dt or a.param_dim != b.param_dim:
            raise InvalidTensor("train and test must share time grid and parameter dim")
        train_rows = {tuple(p) for p in a.parameters}
        if any(tuple(p) in train_rows for p in b.parameters):
            raise InvalidTensor("train and test parameter sets must be disjoint")


def toy_field(x, t, amplitude, frequency=1.0):
    """Multiscale oscillating field.

    ``A [sin(2x - w t) + 0.1 cos((40x + 2t) sin t)] exp(-x^2)``; ``w = 1``
    gives the standard toy problem, other values are used by the
    two-parameter family.
    """
    return (
        amplitude
        * (np.sin(2 * x - frequency * t) + 0.1 * np.cos((40 * x + 2 * t) * np.sin(t)))
        * np.exp(-(x**2))
    )


def _toy_grid(nx, nt):
    if nx < 2 or nt < 2:
        raise InvalidGrid(f"toy grid needs nx >= 2 and nt >= 2, got nx={nx}, nt={nt}")
    x = np.linspace(*TOY_X_RANGE, nx)
    dt = (TOY_T_RANGE[1] - TOY_T_RANGE[0]) / (nt - 1)
    t = TOY_T_RANGE[0] + dt * np.arange(nt)
    return x, t, dt


def generate_toy(amplitudes, nx=600, nt=201):
    """Sample the toy field for each amplitude on ``[-3, 3] x [0, 2 pi]``."""
    amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=np.float64))
    if amplitudes.size == 0:
        raise InvalidGrid("at least one amplitude is required")
    x, t, dt = _toy_grid(nx, nt)
    values = np.stack([toy_field(x[None, :], t[:, None], a) for a in amplitudes])
    return SnapshotTensor(amplitudes[:, None], values, t[0], dt)


def generate_toy_family(parameters, nx=100, nt=101):
    """Two-parameter variant: rows of ``parameters`` are ``(amplitude, frequency)``."""
    parameters = np.atleast_2d(np.asarray(parameters, dtype=np.float64))
    if parameters.shape[1] != 2 or parameters.shape[0] == 0:
        raise InvalidGrid("parameters must have shape (n, 2)")
    x, t, dt = _toy_grid(nx, nt)
    values = np.stack(
        [toy_field(x[None, :], t[:, None], a, w) for a, w in parameters]
    )
    return SnapshotTensor(parameters, values, t[0], dt)


def center_scale_stats(tensor):
    """Per-state mean and one global scale.

    The scale is the standard deviation of all centered entries, replaced by
    1 when the data are constant.
    """
    values = tensor.values if isinstance(tensor, SnapshotTensor) else np.asarray(tensor)
    flat = values.reshape(-1, values.shape[-1])
    mean = flat.mean(axis=0)
    scale = float(np.sqrt(np.mean((flat - mean) ** 2)))
    if not scale > 0:
        scale = 1.0
    return mean, scale


def save_snapshots(tensor, path):
    if not isinstance(tensor, SnapshotTensor):
        raise InvalidTensor("save_snapshots expects a SnapshotTensor")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        tensor.n_params,
        tensor.n_times,
        tensor.state_dim,
        tensor.param_dim,
        tensor.t0,
        tensor.dt,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(tensor.parameters, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(tensor.values, dtype="<f8").tobytes())
        fh.flush()
        os.fsync(fh.fileno())


def load_snapshots(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) > 4 and blob[4] != VERSION:
        raise FormatError(f"{path}: unsupported version {blob[4]}")
    if len(blob) < HEADER_SIZE:
        raise ShapeError(f"{path}: truncated header")
    _, _, n_mu, n_t, n_u, n_dim, t0, dt = _HEADER.unpack_from(blob)
    n_par = n_mu * n_dim
    n_val = n_mu * n_t * n_u
    expected = HEADER_SIZE + 8 * (n_par + n_val)
    if len(blob) != expected:
        raise ShapeError(
            f"{path}: header implies {expected} bytes, file has {len(blob)}"
        )
    if not (np.isfinite(dt) and dt > 0):
        raise NonUniformTimeGrid(f"{path}: invalid time step {dt}")
    params = np.frombuffer(blob, "<f8", n_par, HEADER_SIZE).reshape(n_mu, n_dim)
    values = np.frombuffer(blob, "<f8", n_val, HEADER_SIZE + 8 * n_par)
    return SnapshotTensor(params, values.reshape(n_mu, n_t, n_u), t0, dt)


def export_csv(tensor, path):
    """One row per (parameter, time) with the state entries as columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param_index", "time"] + [str(j) for j in range(tensor.state_dim)])
        times = tensor.times
        for i in range(tensor.n_params):
            for k in range(tensor.n_times):
                w.writerow([i, repr(float(times[k]))] + [repr(float(v)) for v in tensor.values[i, k]])
