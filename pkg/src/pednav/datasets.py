"""Record-per-line text persistence for collected datasets.

Format (documented in docs/dataset_format.md):
  header:  # pednav-dataset v1 raster=H,W,C scalars=N
  meta  <scenario> it=<n> src=<prov> obs=<f,f,...>
  act   <scenario> it=<n> src=<prov> w=<f> steer=<f,...> speed=<f,...> obs=<f,f,...>
Floats use repr (shortest round-trip), so save -> load -> save is byte-stable.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .imitation import DatasetStore
from .policy import LabeledSample, SoftTarget
from .sim.world import Observation, ScenarioId

HEADER_TAG = "# pednav-dataset v1"

_SCENARIO_BY_VALUE = {s.value: s for s in ScenarioId}


def _fmt(values) -> str:
    return ",".join(repr(float(v)) for v in np.asarray(values).ravel())


def _sample_line(sample: LabeledSample) -> str:
    common = f"{sample.scenario.value} it={sample.iteration} src={sample.provenance}"
    obs = sample.observation
    obs_part = f"obs={_fmt(obs.raster)};{_fmt(obs.scalars)}"
    if sample.is_meta:
        return f"meta {common} {obs_part}"
    t = sample.target
    return (f"act {common} w={t.weight!r} steer={_fmt(t.steer_dist)} "
            f"speed={_fmt(t.speed_dist)} {obs_part}")


def save_samples(samples, path, raster_shape, n_scalars: int) -> None:
    h, w, c = raster_shape
    lines = [f"{HEADER_TAG} raster={h},{w},{c} scalars={n_scalars}"]
    lines += [_sample_line(s) for s in samples]
    Path(path).write_text("\n".join(lines) + "\n")


def save_store(store: DatasetStore, path) -> None:
    samples = list(store.meta)
    for g in ScenarioId:
        samples.extend(store.actions[g])
    if not samples:
        raise ValueError("refusing to save an empty dataset store")
    obs = samples[0].observation
    save_samples(samples, path, obs.raster.shape, obs.scalars.size)


def load_samples(path) -> list[LabeledSample]:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith(HEADER_TAG):
        raise ValueError(f"{path}: missing dataset header")
    header = dict(part.split("=", 1)
                  for part in lines[0].split()[len(HEADER_TAG.split()):])
    raster_shape = tuple(int(v) for v in header["raster"].split(","))
    n_scalars = int(header["scalars"])
    out = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        out.append(_parse_line(line, raster_shape, n_scalars, path, ln))
    return out


def load_store(path) -> DatasetStore:
    store = DatasetStore()
    for sample in load_samples(path):
        if sample.is_meta:
            store.append_meta(sample)
        else:
            store.append_action(sample)
    return store


def _parse_line(line: str, raster_shape, n_scalars: int, path, ln: int) -> LabeledSample:
    parts = line.split()
    try:
        kind, scenario_name = parts[0], parts[1]
        fields = dict(p.split("=", 1) for p in parts[2:])
        scenario = _SCENARIO_BY_VALUE[scenario_name]
        raster_txt, scalars_txt = fields["obs"].split(";")
        raster = np.array([float(v) for v in raster_txt.split(",")]).reshape(raster_shape)
        scalars = np.array([float(v) for v in scalars_txt.split(",")])
        if scalars.size != n_scalars:
            raise ValueError("scalar count mismatch")
        obs = Observation(raster=raster, scalars=scalars)
        iteration = int(fields["it"])
        provenance = fields["src"]
        if kind == "meta":
            from .policy import SCENARIO_INDEX
            return LabeledSample(obs, scenario, meta_target=SCENARIO_INDEX[scenario],
                                 provenance=provenance, iteration=iteration)
        if kind != "act":
            raise ValueError(f"unknown record kind {kind!r}")
        target = SoftTarget(
            steer_dist=np.array([float(v) for v in fields["steer"].split(",")]),
            speed_dist=np.array([float(v) for v in fields["speed"].split(",")]),
            weight=float(fields["w"]),
        )
        return LabeledSample(obs, scenario, target=target,
                             provenance=provenance, iteration=iteration)
    except (KeyError, IndexError, ValueError) as exc:
        raise ValueError(f"{path}:{ln}: malformed dataset record: {exc}") from exc
