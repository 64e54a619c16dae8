"""Versioned binary checkpoint layout for policy bundles.

Layout (little-endian, documented bit-exactly in docs/checkpoint_format.md):
  magic   8 bytes  b"PDNAVCK1"
  version u32      currently 1
  dims    5 x u32  in_dim, hidden, n_scenarios, n_steer, n_speed
  arrays  float64  row-major, in fixed order:
          w_trunk (in_dim x hidden), b_trunk (hidden),
          w_meta (hidden x n_scenarios), b_meta (n_scenarios),
          then per scenario g = 0..3: w_sub[g] (hidden x (n_steer+n_speed)),
          b_sub[g] (n_steer+n_speed)
Round-trips are bit-exact.
"""
from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .policy import N_SCENARIOS, PolicyBundle
from .sim.world import N_SPEED, N_STEER

MAGIC = b"PDNAVCK1"
VERSION = 1


def _arrays_in_order(bundle: PolicyBundle) -> list:
    out = [bundle.w_trunk, bundle.b_trunk, bundle.w_meta, bundle.b_meta]
    for g in range(N_SCENARIOS):
        out.extend([bundle.w_sub[g], bundle.b_sub[g]])
    return out


def save_checkpoint(bundle: PolicyBundle, path) -> str:
    """Write the bundle; returns the checkpoint's content hash (hex)."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<6I", VERSION, bundle.in_dim, bundle.hidden,
                        N_SCENARIOS, N_STEER, N_SPEED)
    for arr in _arrays_in_order(bundle):
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load_checkpoint(path) -> PolicyBundle:
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a policy checkpoint (bad magic)")
    version, in_dim, hidden, n_scen, n_steer, n_speed = struct.unpack_from("<6I", blob, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if (n_scen, n_steer, n_speed) != (N_SCENARIOS, N_STEER, N_SPEED):
        raise ValueError(f"{path}: action-space dims {(n_scen, n_steer, n_speed)} "
                         f"do not match this build")
    bundle = object.__new__(PolicyBundle)
    bundle.in_dim = in_dim
    bundle.hidden = hidden
    offset = 8 + struct.calcsize("<6I")

    def take(shape) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        offset += count * 8
        return arr.reshape(shape).astype(float)

    bundle.w_trunk = take((in_dim, hidden))
    bundle.b_trunk = take((hidden,))
    bundle.w_meta = take((hidden, n_scen))
    bundle.b_meta = take((n_scen,))
    bundle.w_sub = []
    bundle.b_sub = []
    for _ in range(n_scen):
        bundle.w_sub.append(take((hidden, n_steer + n_speed)))
        bundle.b_sub.append(take((n_steer + n_speed,)))
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes after parameter arrays")
    return bundle


def checkpoint_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
