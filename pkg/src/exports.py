"""
Result Writers

CSV and JSON serialization for tables and reports. Rows are plain dicts;
floats are written with repr so repeated runs are byte-identical and no
locale is involved.
"""

import csv
import io
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO, Union

logger = logging.getLogger(__name__)

Destination = Union[str, Path, TextIO, None]

PROPAGATOR_COLUMNS = ["u", "r", "t", "re", "im", "delta"]
SCAN_COLUMNS = ["n", "powers", "state", "u_tuple", "r", "re_F", "im_F", "abs_F"]


def _cell(value: Any) -> str:
    """Render one CSV cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value)) if math.isfinite(value) else str(float(value))
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def jsonable(value: Any) -> Any:
    """Convert complex numbers, tuples and non-finite floats for json.dumps."""
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return jsonable(value.item())
    return value


def _open(destination: Destination):
    if destination is None or destination == "-":
        return None
    path = Path(destination) if not hasattr(destination, "write") else None
    if path is None:
        return None
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="", encoding="utf-8")


def render_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), extrasaction="ignore",
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _cell(row.get(c)) for c in columns})
    return buffer.getvalue()


def render_json(document: Any) -> str:
    return json.dumps(jsonable(document), indent=2, sort_keys=False) + "\n"


def with_metadata(document: Dict[str, Any], reproducible: bool) -> Dict[str, Any]:
    """Attach a wall-clock stamp unless output must be reproducible."""
    if reproducible:
        return document
    stamped = dict(document)
    stamped["metadata"] = {"generated_at": datetime.now(timezone.utc).isoformat()}
    return stamped


def write_text(text: str, destination: Destination, stream: Optional[TextIO] = None) -> None:
    handle = _open(destination)
    if handle is None:
        target = destination if hasattr(destination, "write") else (stream or sys.stdout)
        target.write(text)
        return
    with handle:
        handle.write(text)
    logger.info(f"Wrote {len(text)} characters to {destination}")


def write_csv(rows: List[Dict[str, Any]], columns: Sequence[str], destination: Destination,
              stream: Optional[TextIO] = None) -> None:
    write_text(render_csv(rows, columns), destination, stream)


def write_json(document: Any, destination: Destination, stream: Optional[TextIO] = None) -> None:
    write_text(render_json(document), destination, stream)
