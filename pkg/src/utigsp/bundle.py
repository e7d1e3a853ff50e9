"""On-disk dataset bundles: CSV sample files, JSON manifests and model files."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from utigsp.graphs import Dag, format_graph, parse_graph
from utigsp.sem import InterventionSpec, SemModel
from utigsp.stats import DataError


class ConfigError(ValueError):
    """Invalid or inconsistent configuration / manifest."""


def write_csv(path, x: np.ndarray) -> None:
    """Write samples with header ``x0..x{p-1}``; values use the shortest round-trip repr."""
    x = np.asarray(x, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(f"x{j}" for j in range(x.shape[1])) + "\n")
        for row in x:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path, p: Optional[int] = None) -> np.ndarray:
    """Read a sample file written by :func:`write_csv` (any header names are accepted).

    Raises
    ------
    DataError
        On ragged rows, non-numeric or non-finite entries, or a column count
        different from ``p``. Messages carry the 1-based line number.
    """
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        width = len(header)
        if p is not None and width != p:
            raise DataError(f"{path}:1: expected {p} columns, header has {width}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}:{line}: expected {width} values, found {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                bad = next(v for v in row if not _is_float(v))
                raise DataError(f"{path}:{line}: non-numeric value {bad!r}") from None
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}:{line}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows)


def _is_float(v: str) -> bool:
    try:
        float(v)
    except ValueError:
        return False
    return True


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path, what: str = "file"):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{what} {path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


@dataclass
class SettingEntry:
    file: str
    known_targets: list
    true_targets: Optional[list] = None


@dataclass
class Manifest:
    """Inputs of one learning problem.

    Relative file paths are resolved against the manifest's directory.
    ``model_file`` and ``truth_file`` are optional and only present for
    simulated bundles.
    """

    p: int
    obs_file: str
    settings: list = field(default_factory=list)
    seed: Optional[int] = None
    intervention: Optional[str] = None
    model_file: Optional[str] = None
    truth_file: Optional[str] = None
    root: Path = field(default=Path("."), compare=False)

    @property
    def K(self) -> int:
        return len(self.settings)

    def path(self, name: str) -> Path:
        return self.root / name

    def to_dict(self) -> dict:
        d = {
            "p": self.p,
            "K": self.K,
            "obs_file": self.obs_file,
            "settings": [
                {"file": s.file, "known_targets": sorted(s.known_targets), **({"true_targets": sorted(s.true_targets)} if s.true_targets is not None else {})}
                for s in self.settings
            ],
        }
        for key in ("seed", "intervention", "model_file", "truth_file"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d

    @classmethod
    def from_dict(cls, d: dict, root: Path = Path(".")) -> "Manifest":
        try:
            p = int(d["p"])
            settings = [
                SettingEntry(str(s["file"]), [int(i) for i in s.get("known_targets", [])],
                             None if s.get("true_targets") is None else [int(i) for i in s["true_targets"]])
                for s in d.get("settings", [])
            ]
            m = cls(p, str(d["obs_file"]), settings, d.get("seed"), d.get("intervention"), d.get("model_file"), d.get("truth_file"), root)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed manifest: {exc!r}") from exc
        if p < 1:
            raise ConfigError("manifest p must be positive")
        if "K" in d and int(d["K"]) != m.K:
            raise ConfigError(f"manifest K={d['K']} but {m.K} settings listed")
        for s in settings:
            for i in s.known_targets + (s.true_targets or []):
                if not 0 <= i < p:
                    raise ConfigError(f"target {i} out of range for p={p}")
        return m

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        return cls.from_dict(read_json(path, "manifest"), path.parent)

    def load_data(self) -> tuple[np.ndarray, list]:
        """Observational matrix and one matrix per setting."""
        obs = read_csv(self.path(self.obs_file), self.p)
        return obs, [read_csv(self.path(s.file), self.p) for s in self.settings]

    def load_truth(self) -> Optional[Dag]:
        if self.truth_file is None:
            return None
        return parse_graph(self.path(self.truth_file).read_text())

    def load_model(self) -> tuple[SemModel, list]:
        """Simulated model and the intervention applied in each setting."""
        if self.model_file is None:
            raise ConfigError("manifest has no model_file; oracle mode needs a simulated bundle")
        d = read_json(self.path(self.model_file), "model file")
        return SemModel.from_dict(d["model"]), [InterventionSpec.from_dict(s) for s in d["interventions"]]


def write_bundle(out_dir, model: SemModel, specs: list, known: list, data_obs: np.ndarray, data_int: list, seed: Optional[int] = None) -> Path:
    """Write a full simulated bundle into ``out_dir`` and return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "truth.txt").write_text(format_graph(model.g))
    write_json(out / "model.json", {"model": model.to_dict(), "interventions": [s.to_dict() for s in specs]})
    write_csv(out / "obs.csv", data_obs)
    settings = []
    for k, (spec, kn, x) in enumerate(zip(specs, known, data_int)):
        name = f"setting_{k + 1}.csv"
        write_csv(out / name, x)
        settings.append(SettingEntry(name, sorted(kn), sorted(spec.targets)))
    kind = specs[0].kind if specs else None
    manifest = Manifest(model.p, "obs.csv", settings, seed, kind, "model.json", "truth.txt", out)
    write_json(out / "manifest.json", manifest.to_dict())
    return out / "manifest.json"


def check_writable(path) -> None:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc.strerror}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
