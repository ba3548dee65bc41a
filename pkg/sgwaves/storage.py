"""Artifact storage for sg-waves: profiles, tables, field snapshots and run manifests."""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Union

import numpy as np
from loguru import logger

from sgwaves.model import Params
from sgwaves.pde import Field, energy_report
from sgwaves.profiles import WaveProfile

OutputFormat = Literal["csv", "json"]
FREE_PARAMETER = "free parameter"
PROFILE_COLUMNS = ("xi", "g", "gp")
HEADER_KEYS = ("kind", "gamma", "alpha", "mu", "v", "Xi", "n", "sign", "circumference")


class DryRunStats:
    """Statistics for dry-run mode."""

    def __init__(self):
        self.files = []
        self.total_size = 0
        self.operations = []

    def add_operation(self, operation: str, filepath: str, size: int):
        self.operations.append({"operation": operation, "filepath": filepath, "size": size})
        self.files.append(filepath)
        self.total_size += size

    def get_summary(self) -> str:
        lines = ["\n" + "=" * 70, "DRY RUN SUMMARY", "=" * 70]
        lines.append(f"Artifacts: {len(self.files)}")
        lines.append(f"Total size: {self._format_size(self.total_size)}")
        lines.append("")
        lines.append("Files that would be written:")
        lines.append("-" * 70)
        for op in self.operations:
            lines.append(
                f"  [{op['operation']}] {op['filepath']} ({self._format_size(op['size'])})"
            )
        lines.append("=" * 70)
        return "\n".join(lines)

    @staticmethod
    def _format_size(size_bytes: int) -> str:
        if size_bytes < 1024:
            return f"{size_bytes} bytes"
        elif size_bytes < 1024 * 1024:
            return f"{size_bytes / 1024:.2f} KB"
        else:
            return f"{size_bytes / (1024 * 1024):.2f} MB"


def format_float(value: Any) -> str:
    """Shortest repr that round-trips a double; None becomes an empty cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(to_jsonable(value))
    return str(value)


def to_jsonable(value: Any) -> Any:
    """numpy scalars and arrays to plain Python, recursively."""
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    return value


def profile_header(profile: WaveProfile) -> Dict[str, Any]:
    """Scalar description of a profile; a None speed is written as the free-parameter sentinel."""
    header: Dict[str, Any] = {
        "kind": profile.kind,
        "gamma": profile.gamma,
        "alpha": profile.alpha,
        "mu": profile.mu,
        "v": FREE_PARAMETER if profile.v is None else profile.v,
        "Xi": profile.Xi,
        "n": profile.winding,
        "sign": profile.sign,
        "circumference": profile.circumference(1) if profile.Xi is not None else None,
    }
    return header


def _columns(profile: WaveProfile) -> Dict[str, np.ndarray]:
    columns = {"xi": profile.xi, "g": profile.g, "gp": profile.gp}
    for key, value in profile.meta.items():
        if isinstance(value, np.ndarray) and value.shape == profile.xi.shape:
            columns[key] = value
    return columns


def _scalar_meta(profile: WaveProfile) -> Dict[str, Any]:
    return {
        key: to_jsonable(value)
        for key, value in profile.meta.items()
        if not isinstance(value, np.ndarray)
    }


def profile_to_csv(profile: WaveProfile) -> str:
    lines = []
    for key, value in profile_header(profile).items():
        lines.append(f"# {key}: {format_float(value) if value is not None else 'none'}")
    for key, value in _scalar_meta(profile).items():
        lines.append(f"# meta.{key}: {json.dumps(value)}")
    columns = _columns(profile)
    lines.append(",".join(columns))
    for row in zip(*columns.values()):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def profile_to_dict(profile: WaveProfile) -> Dict[str, Any]:
    data = profile_header(profile)
    data["meta"] = _scalar_meta(profile)
    for key, values in _columns(profile).items():
        data[key] = [float(v) for v in values]
    return data


def _parse_header_value(key: str, text: str) -> Any:
    text = text.strip()
    if text == "none":
        return None
    if key == "v" and text == FREE_PARAMETER:
        return None
    if key == "kind":
        return text
    if key in ("n", "sign"):
        return int(text)
    return float(text)


def _profile_from_parts(header: Dict[str, Any], meta: Dict[str, Any], columns: Dict[str, Any]):
    v = header.get("v")
    meta = dict(meta)
    for key, values in columns.items():
        if key not in PROFILE_COLUMNS:
            meta[key] = np.asarray(values, dtype=float)
    return WaveProfile(
        kind=header["kind"],
        xi=np.asarray(columns["xi"], dtype=float),
        g=np.asarray(columns["g"], dtype=float),
        gp=np.asarray(columns["gp"], dtype=float),
        gamma=float(header["gamma"]),
        alpha=float(header["alpha"]),
        mu=float(header["mu"]),
        v=None if v is None or v == FREE_PARAMETER else float(v),
        winding=int(header["n"]),
        Xi=None if header.get("Xi") is None else float(header["Xi"]),
        sign=int(header.get("sign", 1)),
        meta=meta,
    )


def read_profile(path: Union[str, Path]) -> WaveProfile:
    """Load a profile written by emit_profile (format taken from the file suffix)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        columns = {k: v for k, v in data.items() if isinstance(v, list) and k not in ("meta",)}
        return _profile_from_parts(data, data.get("meta", {}), columns)

    header: Dict[str, Any] = {}
    meta: Dict[str, Any] = {}
    rows: List[List[float]] = []
    names: Optional[List[str]] = None
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key = key.strip()
            if key.startswith("meta."):
                meta[key[5:]] = json.loads(value.strip())
            else:
                header[key] = _parse_header_value(key, value)
        elif names is None:
            names = [n.strip() for n in line.split(",")]
        else:
            rows.append([float(v) for v in line.split(",")])
    if names is None:
        raise ValueError(f"no column header in {path}")
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    columns = {name: data[:, i] for i, name in enumerate(names)}
    return _profile_from_parts(header, meta, columns)


def _write(path: Path, content: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def emit_profile(profile: WaveProfile, fmt: OutputFormat, path: Union[str, Path]) -> Path:
    """Write a profile as CSV (header comments plus xi,g,gp columns) or as its JSON mirror."""
    if len(profile) == 0:
        raise ValueError("cannot emit an empty profile")
    path = Path(path)
    if fmt == "csv":
        _write(path, profile_to_csv(profile))
    elif fmt == "json":
        _write(path, json.dumps(profile_to_dict(profile), indent=2) + "\n")
    else:
        raise ValueError(f"unknown output format: {fmt}")
    return path


def table_to_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(format_float(row.get(c)) for c in columns))
    return "\n".join(lines) + "\n"


def field_to_csv(field: Field, params: Params, flipped: bool = False) -> str:
    """Snapshot rows x,phi,phi_t,h; `flipped` maps a field run at |gamma| back through phi -> -phi."""
    h = energy_report(field, params).h
    sign = -1.0 if flipped else 1.0
    lines = ["x,phi,phi_t,h"]
    for row in zip(field.x, sign * field.phi, sign * field.phi_t, h):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


class ArtifactStorage:
    """Writes run artifacts into one output directory, or only tallies them in dry-run mode."""

    def __init__(
        self,
        output_dir: Union[str, Path],
        fmt: OutputFormat = "csv",
        dry_run: bool = False,
    ):
        """
        Initialize artifact storage.

        Args:
            output_dir: Directory receiving every artifact
            fmt: Format for profiles and tables, 'csv' or 'json'
            dry_run: If True, report what would be written without touching the disk
        """
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown output format: {fmt}")
        self.output_dir = Path(output_dir)
        self.fmt = fmt
        self.dry_run = dry_run
        self._dry_run_stats = DryRunStats() if dry_run else None
        self.written: List[Path] = []

        if not dry_run:
            self.output_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, name: str, suffix: str) -> Path:
        return self.output_dir / f"{name}.{suffix}"

    def _store(self, operation: str, path: Path, content: str) -> Path:
        if self.dry_run:
            self._dry_run_stats.add_operation(operation, str(path), len(content))
            logger.info(f"[DRY-RUN] Would write {len(content)} bytes to {path}")
        else:
            _write(path, content)
            self.written.append(path)
            logger.info(f"Written {len(content)} bytes to {path}")
        return path

    def write_profile(self, profile: WaveProfile, name: str) -> Path:
        path = self.path_for(name, self.fmt)
        if self.fmt == "csv":
            content = profile_to_csv(profile)
        else:
            content = json.dumps(profile_to_dict(profile), indent=2) + "\n"
        return self._store("PROFILE", path, content)

    def write_table(self, name: str, rows: Sequence[Mapping[str, Any]]) -> Path:
        path = self.path_for(name, self.fmt)
        if self.fmt == "csv":
            content = table_to_csv(rows)
        else:
            content = json.dumps(to_jsonable(list(rows)), indent=2) + "\n"
        return self._store("TABLE", path, content)

    def write_field(
        self, name: str, field: Field, params: Params, flipped: bool = False
    ) -> Path:
        content = field_to_csv(field, params, flipped=flipped)
        return self._store("FIELD", self.path_for(name, "csv"), content)

    def write_json(self, name: str, data: Mapping[str, Any]) -> Path:
        content = json.dumps(to_jsonable(data), indent=2, allow_nan=True) + "\n"
        return self._store("JSON", self.path_for(name, "json"), content)

    def write_manifest(self, name: str, manifest: Mapping[str, Any]) -> Path:
        content = json.dumps(to_jsonable(manifest), indent=2, sort_keys=True) + "\n"
        return self._store("MANIFEST", self.output_dir / f"{name}.manifest.json", content)

    def get_dry_run_summary(self) -> Optional[str]:
        if self._dry_run_stats:
            return self._dry_run_stats.get_summary()
        return None
