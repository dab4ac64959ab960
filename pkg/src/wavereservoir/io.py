"""File formats: model files, signal CSVs, dataset manifests, JSONL records.

Model files are JSON. Python's float repr round-trips every 64-bit value, so
a saved model reloads bit-identically. The recurrent matrix is never stored:
wave models rebuild it from their fields, random baselines from their
generation parameters.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .readout import Readout
from .reservoir import ReservoirModel
from .signals import Signal
from .wave import DampingField, GridSpec, SpeedField

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised for unreadable or incompatible model files."""


@dataclass
class ModelFile:
    model: ReservoirModel
    readout: Readout | None = None
    seeds: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    baseline: dict | None = None


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _grid(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(mf: ModelFile) -> dict:
    m = mf.model
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "wave" if m.is_wave else "random",
        "grid": asdict(m.spec),
        "c": {"values": _grid(m.c.values), "scale_accum": m.c.scale_accum},
        "k": {"kx": _grid(m.k.kx), "ky": _grid(m.k.ky),
              "k_min": m.k.k_min, "k_max": m.k.k_max},
        "alpha": m.alpha,
        "noise_amp": m.noise_amp,
        "input_gain": m.input_gain,
        "input_seed": m.seed,
        "w_in": _grid(m.w_in),
        "seeds": dict(mf.seeds),
        "provenance": {"tool_version": __version__, **mf.provenance},
    }
    if mf.readout is not None:
        doc["w_out"] = _grid(mf.readout.w_out)
        doc["bias"] = float(mf.readout.bias)
    if not m.is_wave:
        if mf.baseline is None:
            raise ModelFormatError("random reservoirs need their generation parameters")
        doc["baseline"] = dict(mf.baseline)
    return doc


def model_from_dict(doc: dict) -> ModelFile:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format_version {version!r}; expected {FORMAT_VERSION}")
    try:
        spec = GridSpec(**doc["grid"])
        c = SpeedField(np.array(doc["c"]["values"]), doc["c"]["scale_accum"])
        k = DampingField(np.array(doc["k"]["kx"]), np.array(doc["k"]["ky"]),
                         doc["k"]["k_min"], doc["k"]["k_max"])
        w_override = None
        baseline = doc.get("baseline")
        if doc["kind"] == "random":
            from .evaluation import random_reservoir
            w_override = random_reservoir(spec, baseline["density"],
                                          baseline["spectral_radius"],
                                          baseline["seed"]).w
        model = ReservoirModel(spec, c, k, doc["alpha"], np.array(doc["w_in"]),
                               doc["noise_amp"], doc["input_seed"],
                               doc["input_gain"], w_override)
        readout = None
        if "w_out" in doc:
            readout = Readout(np.array(doc["w_out"]), doc["bias"])
    except (KeyError, TypeError) as err:
        raise ModelFormatError(f"malformed model file: {err}") from err
    return ModelFile(model, readout, doc.get("seeds", {}),
                     doc.get("provenance", {}), baseline)


def save_model(path, mf: ModelFile) -> None:
    Path(path).write_text(json.dumps(model_to_dict(mf), indent=1))


def load_model(path) -> ModelFile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ModelFormatError(f"{path}: not a JSON model file ({err})") from err
    return model_from_dict(doc)


# -- signals ---------------------------------------------------------------

def write_signal(path, sig: Signal) -> None:
    """Two-column CSV ``time_s,value`` plus a ``.json`` annotation sidecar."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "value"])
        for t, v in zip(sig.times, sig.samples):
            w.writerow([repr(float(t)), repr(float(v))])
    sidecar = {"dt": sig.dt, "interval_s": sig.interval_s,
               "beat_times": [float(b) for b in sig.beat_times]}
    path.with_suffix(".json").write_text(json.dumps(sidecar))


def read_signal(path) -> Signal:
    path = Path(path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["time_s", "value"]:
        raise ValueError(f"{path}: expected header time_s,value")
    values = np.array([float(r[1]) for r in rows[1:]])
    times = np.array([float(r[0]) for r in rows[1:]])
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    dt = meta.get("dt") or (float(times[1] - times[0]) if len(times) > 1 else 0.006)
    return Signal(values, dt, np.array(meta.get("beat_times", [])),
                  meta.get("interval_s"))


def write_dataset(out_dir, dataset, extra: dict | None = None) -> Path:
    """One CSV per sample plus ``manifest.json`` indexing files and parameters."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (sig, params) in enumerate(zip(dataset.signals, dataset.params)):
        name = f"sample_{i:05d}.csv"
        write_signal(out / name, sig)
        entries.append({"file": name, **params})
    manifest = {"config": asdict(dataset.config), "samples": entries,
                **(extra or {})}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path


def read_dataset(path) -> list[Signal]:
    """Signals listed in a manifest, or every CSV in a directory."""
    path = Path(path)
    if path.is_dir() and (path / "manifest.json").exists():
        path = path / "manifest.json"
    if path.is_file() and path.suffix == ".json":
        manifest = json.loads(path.read_text())
        return [read_signal(path.parent / e["file"]) for e in manifest["samples"]]
    files = sorted(path.glob("*.csv")) if path.is_dir() else []
    if not files:
        raise FileNotFoundError(f"no signals found in {path}")
    return [read_signal(f) for f in files]


def _finite(obj):
    """NaN and infinities become null so records stay strict JSON."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_finite(rec), sort_keys=True, allow_nan=False) + "\n")


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_matrix_csv(path, matrix, header=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in np.atleast_2d(matrix):
            w.writerow([repr(float(v)) for v in row])
