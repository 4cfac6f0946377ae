"""Per-case fan-out with order-stable merging and failure bookkeeping."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

NIFTI_SUFFIXES = (".nii.gz", ".nii")


def case_id_of(path: Path) -> str | None:
    for suf in NIFTI_SUFFIXES:
        if path.name.endswith(suf):
            return path.name[: -len(suf)]
    return None


def list_cases(directory) -> dict[str, Path]:
    """NIfTI files in ``directory`` keyed by case id, sorted by id."""
    found = {}
    for p in sorted(Path(directory).iterdir()):
        cid = case_id_of(p)
        if cid is not None and p.is_file():
            if cid in found:
                raise ValueError(f"case {cid!r} appears twice in {directory}")
            found[cid] = p
    return dict(sorted(found.items()))


@dataclass(frozen=True)
class Failure:
    case_id: str
    command: str
    error: str
    message: str


def _guarded(args):
    fn, case_id, payload = args
    try:
        return case_id, True, fn(case_id, *payload)
    except Exception as exc:  # recorded per case, the batch carries on
        return case_id, False, (type(exc).__name__, str(exc))


def run_cases(fn, items, command: str, jobs: int = 1):
    """Apply ``fn(case_id, *payload)`` to every ``(case_id, payload)`` item.

    Returns ``(results, failures)`` where ``results`` maps case id to the
    return value, in the input order, whatever the completion order.
    """
    work = [(fn, cid, tuple(payload)) for cid, payload in items]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_guarded, work))
    else:
        outs = [_guarded(w) for w in work]
    results, failures = {}, []
    for cid, ok, value in outs:
        if ok:
            results[cid] = value
        else:
            logger.warning("%s: case %s failed: %s: %s", command, cid, *value)
            failures.append(Failure(cid, command, *value))
    return results, failures


def write_failures(failures, out_dir) -> Path:
    path = Path(out_dir) / "failures.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "command", "error", "message"])
        for f in failures:
            w.writerow([f.case_id, f.command, f.error, f.message])
    return path
