"""Built-in billiard tables, stored as table-file text."""

from __future__ import annotations

from pathlib import Path

from .geometry import BilliardTable, TableError, parse_table

BUILTIN = {
    "sinai-two-disk": """\
name = "sinai-two-disk"
description = "flat unit torus, disks of radius 0.3 at (0,0) and (0.5,0.5)"

[metric]
period_x = 1.0
period_y = 1.0

[[walls]]
type = "circle"
center = [0.0, 0.0]
radius = 0.3

[[walls]]
type = "circle"
center = [0.5, 0.5]
radius = 0.3
""",
    "sinai-one-disk": """\
name = "sinai-one-disk"
description = "flat unit torus, one disk of radius 0.3 at (0.5,0.5); has open corridors"

[metric]
period_x = 1.0
period_y = 1.0

[[walls]]
type = "circle"
center = [0.5, 0.5]
radius = 0.3
""",
    "flat-empty": """\
name = "flat-empty"
description = "flat unit torus without walls"

[metric]
period_x = 1.0
period_y = 1.0
""",
    "curved-bump": """\
name = "curved-bump"
description = "phi = 0.1 cos(2 pi x) cos(2 pi y) with one disk of radius 0.2 at (0.5,0.5)"

[metric]
period_x = 1.0
period_y = 1.0
phi_modes = [[1, 1, 0.05, 0.0], [1, -1, 0.05, 0.0]]

[[walls]]
type = "circle"
center = [0.5, 0.5]
radius = 0.2
""",
    "sinai-four-disk": """\
name = "sinai-four-disk"
description = "flat unit torus, disks 0.35 at (0,0),(0.5,0.5) and 0.1 at (0.5,0),(0,0.5); finite horizon"

[metric]
period_x = 1.0
period_y = 1.0

[[walls]]
type = "circle"
center = [0.0, 0.0]
radius = 0.35

[[walls]]
type = "circle"
center = [0.5, 0.5]
radius = 0.35

[[walls]]
type = "circle"
center = [0.5, 0.0]
radius = 0.1

[[walls]]
type = "circle"
center = [0.0, 0.5]
radius = 0.1
""",
}


def describe(name: str) -> str:
    for line in BUILTIN[name].splitlines():
        if line.startswith("description"):
            return line.split("=", 1)[1].strip().strip('"')
    return ""


def load_table(ref: str) -> tuple[BilliardTable, str]:
    """Table from a built-in name or a file path; also returns the source text."""
    if ref in BUILTIN:
        text = BUILTIN[ref]
        return parse_table(text, name=ref), text
    path = Path(ref)
    if not path.is_file():
        raise TableError(f"table {ref!r} is neither a built-in scenario nor a file")
    text = path.read_text()
    return parse_table(text, name=path.stem), text
