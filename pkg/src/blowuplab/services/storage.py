"""
Run directory storage service.

This module handles file system operations for runs: creating run
directories, writing and reading CSV tables, and persisting manifests and
verification reports as JSON.
"""

from datetime import datetime
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import ValidationError

from blowuplab.core.exceptions import RescaleError, StorageError
from blowuplab.core.pde import Snapshot, Trajectory
from blowuplab.core.profile import ProfileTable
from blowuplab.core.selfsim import RescaledSnapshot, grid_for
from blowuplab.schemas import RunManifest, SnapshotEntry, VerifyReport
from blowuplab.utils.validators import sanitize_run_label, validate_run_path

MANIFEST_NAME = "manifest.json"
SNAPSHOT_DIR = "snapshots"
RESCALED_DIR = "rescaled"

# Round-trip precision for doubles.
_FLOAT_FMT = "%.17g"


def write_csv(path: Path, columns: Dict[str, np.ndarray], comment: Optional[str] = None) -> None:
    """
    Write equally long columns to a CSV file with a header line.

    Args:
        path: Target file
        columns: Column name to values, in output order
        comment: Optional metadata line written first, prefixed with "# "
    """
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt=_FLOAT_FMT)


def read_csv(path: Path) -> Tuple[Dict[str, np.ndarray], str]:
    """
    Read a CSV written by ``write_csv``.

    Returns:
        Tuple of (columns, comment) where comment is "" if absent

    Raises:
        StorageError: If the file is missing or malformed
    """
    if not path.is_file():
        raise StorageError(str(path), "file not found")

    comment = ""
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
            if first.startswith("#"):
                comment = first.lstrip("#").strip()
                header = fh.readline().strip()
            else:
                header = first
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise StorageError(str(path), f"unreadable CSV: {e}")

    names = header.split(",")
    if data.shape[1] != len(names):
        raise StorageError(
            str(path), f"{len(names)} header columns but {data.shape[1]} data columns"
        )
    return {name: data[:, i].copy() for i, name in enumerate(names)}, comment


def _parse_metadata(comment: str) -> Dict[str, float]:
    meta = {}
    for item in comment.split():
        if "=" in item:
            key, value = item.split("=", 1)
            meta[key] = float(value)
    return meta


def save_profile_csv(table: ProfileTable, path: Path) -> None:
    """Write a profile table as y,W,Wp,Wpp with its metadata on the first line."""
    comment = (
        f"beta={table.beta!r} rel_tol={table.rel_tol!r} y_switch={table.y_switch!r} "
        f"switch_mismatch={table.switch_mismatch!r}"
    )
    write_csv(
        path,
        {"y": table.y_nodes, "W": table.w_vals, "Wp": table.wp_vals, "Wpp": table.wpp_vals},
        comment=comment,
    )
    logger.debug(f"Wrote profile table ({table.y_nodes.size} nodes) to {path}")


def load_profile_csv(path: Path) -> ProfileTable:
    """
    Read a profile table written by ``save_profile_csv``.

    Raises:
        StorageError: If the file is missing, malformed or lacks metadata
    """
    cols, comment = read_csv(path)
    meta = _parse_metadata(comment)
    missing = {"beta", "rel_tol", "y_switch"} - set(meta)
    if missing or not {"y", "W", "Wp", "Wpp"} <= set(cols):
        raise StorageError(str(path), "not a profile table")
    return ProfileTable(
        beta=meta["beta"],
        y_nodes=cols["y"],
        w_vals=cols["W"],
        wp_vals=cols["Wp"],
        wpp_vals=cols["Wpp"],
        y_switch=meta["y_switch"],
        rel_tol=meta["rel_tol"],
        switch_mismatch=meta.get("switch_mismatch", 0.0),
    )


class RunStorage:
    """
    Manages run directories under a base output path.

    Handles:
    - Creating uniquely named run directories
    - Writing snapshots, rescaled snapshots and reports
    - Saving and loading manifests
    - Resolving manifest-listed files safely
    """

    def __init__(self, base_path: Path):
        """
        Initialize the storage service.

        Args:
            base_path: Base directory for all runs
        """
        self.base_path = Path(base_path)
        self.base_path.mkdir(parents=True, exist_ok=True)
        logger.debug(f"Run storage initialized with base path: {self.base_path}")

    def create_run_dir(self, label: str) -> Path:
        """
        Create ``<slug>-<timestamp>`` under the base path.

        A numeric suffix is added if the directory already exists.
        """
        stem = f"{sanitize_run_label(label)}-{datetime.now().strftime('%Y%m%d-%H%M%S')}"
        run_dir = self.base_path / stem
        suffix = 1
        while run_dir.exists():
            run_dir = self.base_path / f"{stem}-{suffix}"
            suffix += 1
        run_dir.mkdir(parents=True)
        logger.info(f"Created run directory: {run_dir}")
        return run_dir

    def save_snapshot(self, run_dir: Path, snap: Snapshot) -> str:
        """Write a snapshot CSV and return its run-relative path."""
        relative = f"{SNAPSHOT_DIR}/snap_{snap.index:05d}.csv"
        write_csv(run_dir / relative, snap.fields, comment=f"t={snap.t!r} step={snap.step}")
        return relative

    def save_rescaled(self, run_dir: Path, rsnap: RescaledSnapshot, index: int) -> str:
        """Write a rescaled snapshot CSV and return its run-relative path."""
        relative = f"{RESCALED_DIR}/rescaled_{index:05d}.csv"
        write_csv(run_dir / relative, rsnap.columns(), comment=f"s={rsnap.s!r} t={rsnap.t!r}")
        return relative

    def save_report(self, run_dir: Path, report: VerifyReport, name: str) -> str:
        """Write a VerifyReport as JSON and return its run-relative path."""
        relative = f"{name}.json"
        (run_dir / relative).write_text(report.model_dump_json(indent=2), encoding="utf-8")
        return relative

    def save_manifest(self, run_dir: Path, manifest: RunManifest) -> Path:
        """Write the manifest JSON and return its path."""
        path = run_dir / MANIFEST_NAME
        path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Wrote manifest with {len(manifest.files)} files to {path}")
        return path

    def load_manifest(self, path: Path) -> Tuple[Path, RunManifest]:
        """
        Load a manifest JSON.

        Args:
            path: Manifest file or the run directory holding it

        Returns:
            Tuple of (run_dir, manifest)

        Raises:
            StorageError: If the file is missing or does not validate
        """
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_NAME
        if not path.is_file():
            raise StorageError(str(path), "manifest not found")
        try:
            manifest = RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise StorageError(str(path), f"invalid manifest: {e.error_count()} errors")
        return path.parent, manifest

    def resolve(self, run_dir: Path, manifest: RunManifest, relative_path: str) -> Path:
        """
        Resolve a file listed in the manifest.

        Raises:
            StorageError: If the file is unlisted, escapes the run directory or is missing
        """
        if relative_path not in manifest.files:
            raise StorageError(relative_path, "file is not listed in the manifest")
        full_path = validate_run_path(run_dir, relative_path)
        if full_path is None:
            raise StorageError(relative_path, "path escapes the run directory")
        if not full_path.is_file():
            raise StorageError(str(full_path), "listed file is missing")
        return full_path

    def load_snapshot(self, run_dir: Path, manifest: RunManifest, entry: SnapshotEntry) -> Snapshot:
        """Rebuild a Snapshot from its manifest entry and CSV."""
        cols, _ = read_csv(self.resolve(run_dir, manifest, entry.file))
        return Snapshot(
            index=entry.index,
            step=entry.step,
            t=entry.t,
            fields=cols,
            scalars=entry.scalars,
            modulation=entry.modulation,
        )

    def load_trajectory(self, run_dir: Path, manifest: RunManifest) -> Trajectory:
        """
        Rebuild a Trajectory from a manifest and its snapshot CSVs.

        Raises:
            StorageError: If the manifest lists no snapshots, a file is missing, or the
                x column does not match the configured grid
        """
        if not manifest.snapshots or not manifest.series:
            raise StorageError(str(run_dir), "manifest lists no snapshots")

        snapshots = [self.load_snapshot(run_dir, manifest, e) for e in manifest.snapshots]
        first = manifest.series[0]
        try:
            grid = grid_for(snapshots[0], manifest.config.grid_stretch)
        except RescaleError as e:
            raise StorageError(str(run_dir), str(e))
        return Trajectory(
            config=manifest.config,
            grid=grid,
            initial_slope=max(-first.min_dx, 0.0),
            energy0=first.energy,
            snapshots=snapshots,
            series=list(manifest.series),
            modulation=list(manifest.modulation),
            blowup_flagged=manifest.blowup_flagged,
            stop_reason=manifest.stop_reason,
            steps=snapshots[-1].step,
            predicted_growth=manifest.predicted_growth,
        )


# Global storage instance
_storage: Optional[RunStorage] = None


def get_storage(base_path: Optional[Path] = None) -> RunStorage:
    """
    Get the global storage instance.

    Args:
        base_path: Base output path (defaults to the configured output_dir)

    Returns:
        RunStorage instance
    """
    global _storage

    if _storage is None or (base_path is not None and Path(base_path) != _storage.base_path):
        if base_path is None:
            from blowuplab.config import get_settings

            base_path = get_settings().output_dir

        _storage = RunStorage(base_path)

    return _storage
