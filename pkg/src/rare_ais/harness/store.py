"""File layer for experiment output.

Writes reports atomically, so a viewer polling the directory never reads
a half-written file, and reads them back as report types.
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import aiofiles

from rare_ais.harness.report import ExperimentReport, GroundTruth, attach_series


REPORT_FILE = "report.json"
CURVE_FILE = "curve.csv"
ITERS_FILE = "iters.csv"
TIMING_FILE = "timing.json"
ABLATION_STEM = "ablation"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _csv_rows(text: str | None) -> list[dict[str, str]]:
    if not text:
        return []
    return list(csv.DictReader(io.StringIO(text)))


def _json_object(text: str | None) -> dict[str, Any] | None:
    """Parsed JSON object, or None for missing or malformed text."""
    if text is None:
        return None
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return None
    return data if isinstance(data, dict) else None


def _read_text(path: Path) -> str | None:
    try:
        with open(path, "r") as f:
            return f.read()
    except OSError:
        return None


async def _read_text_async(path: Path) -> str | None:
    try:
        async with aiofiles.open(path, "r") as f:
            return await f.read()
    except OSError:
        return None


def _build_report(
    report_text: str | None,
    timing_text: str | None,
    curve_text: str | None,
    iters_text: str | None,
) -> ExperimentReport | None:
    data = _json_object(report_text)
    if data is None:
        return None
    try:
        report = ExperimentReport.from_dict(data)
    except (KeyError, TypeError, ValueError):
        return None
    timing = _json_object(timing_text) or {}
    report.wall_clock = [float(v) for v in timing.get("wall_clock", [])]
    return attach_series(report, _csv_rows(curve_text), _csv_rows(iters_text))


class ResultStore:
    """Reads and writes the files of one experiment output directory."""

    def __init__(self, out_dir: Path | str):
        """Initialize with output directory.

        Args:
            out_dir: Where report.json and its companions live
        """
        self.out_dir = Path(out_dir).resolve()
        self.report_path = self.out_dir / REPORT_FILE
        self.curve_path = self.out_dir / CURVE_FILE
        self.iters_path = self.out_dir / ITERS_FILE
        self.timing_path = self.out_dir / TIMING_FILE

    def ablation_path(self, suffix: str) -> Path:
        return self.out_dir / f"{ABLATION_STEM}.{suffix}"

    def init_dir_sync(self) -> None:
        """Synchronously create the output directory."""
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_text_sync(self, path: Path, content: str) -> None:
        """Synchronously write text atomically via a temp file and rename."""
        path = Path(path)
        temp_path = path.with_suffix(path.suffix + ".tmp")
        with open(temp_path, "w") as f:
            f.write(content)
        temp_path.replace(path)

    def write_json_sync(self, path: Path, data: dict[str, Any]) -> None:
        self.write_text_sync(path, json.dumps(data, indent=2, default=str))

    def write_csv_sync(self, path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
        self.write_text_sync(path, _csv_text(header, rows))

    async def read_report(self) -> ExperimentReport | None:
        """Read report.json with its timings, curves and iterations.

        Returns None if report.json doesn't exist or is invalid.
        """
        texts = [
            await _read_text_async(path)
            for path in (self.report_path, self.timing_path, self.curve_path, self.iters_path)
        ]
        return _build_report(*texts)

    def read_report_sync(self) -> ExperimentReport | None:
        """Synchronously read report.json with its timings, curves and iterations."""
        return _build_report(
            _read_text(self.report_path),
            _read_text(self.timing_path),
            _read_text(self.curve_path),
            _read_text(self.iters_path),
        )

    def read_ground_truth_sync(self, path: Path | str) -> GroundTruth | None:
        """Read a ground-truth file; None if it is missing or lacks env and mu."""
        data = _json_object(_read_text(Path(path)))
        if data is None:
            return None
        try:
            return GroundTruth.from_dict(data)
        except (KeyError, TypeError, ValueError):
            return None
