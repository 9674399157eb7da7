"""Grid value type, attribute accessors, and the solution-equality check."""

from __future__ import annotations

from dataclasses import dataclass, field

from gridsynth import kernels

# Task I/O grids stay within 30 on each axis; intermediate grids produced by
# execution may grow past that (paste extension) but never past this cap.
TASK_DIM_MAX = 30
GRID_CAP = 64

N_COLORS = 10

# Attribute order is part of the token vocabulary layout; do not reorder.
ATTRIBUTES = ("x", "y", "c", "width", "height", "max_x", "max_y", "ul_x", "ul_y")
LIST_ATTRIBUTES = frozenset(("x", "y", "c"))

_coord_cache: dict[tuple[int, int], tuple[list[int], list[int]]] = {}


class GridValueError(ValueError):
    """Malformed grid input (bad color, ragged rows, bad dimensions)."""


@dataclass(frozen=True)
class Grid:
    """Immutable colored grid; cells are flat row-major ints 0-9.

    ul_x/ul_y locate a sub-grid inside an outer grid; task-level grids use
    (0, 0). They do not participate in equality checks.
    """

    cells: tuple[int, ...]
    width: int
    height: int
    ul_x: int = 0
    ul_y: int = 0
    _hash: int = field(init=False, repr=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.cells, self.width)))

    def __hash__(self):
        return self._hash

    @classmethod
    def from_rows(cls, rows, ul_x: int = 0, ul_y: int = 0) -> "Grid":
        if not rows or not rows[0]:
            raise GridValueError("grid must have at least one row and column")
        width = len(rows[0])
        height = len(rows)
        if width > GRID_CAP or height > GRID_CAP:
            raise GridValueError(f"grid exceeds {GRID_CAP}x{GRID_CAP} cap")
        if ul_x < 0 or ul_y < 0:
            raise GridValueError("ul offsets must be non-negative")
        cells = []
        for row in rows:
            if len(row) != width:
                raise GridValueError("all rows must have the same length")
            for v in row:
                if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v < N_COLORS:
                    raise GridValueError(f"cell value {v!r} outside colors 0-{N_COLORS - 1}")
            cells.extend(row)
        return cls(tuple(cells), width, height, ul_x, ul_y)

    def rows(self) -> list[list[int]]:
        w = self.width
        return [list(self.cells[y * w : (y + 1) * w]) for y in range(self.height)]

    def cell(self, x: int, y: int) -> int:
        return self.cells[y * self.width + x]

    def __str__(self):
        return "\n".join("".join(str(v) for v in row) for row in self.rows())


def _coords(width: int, height: int) -> tuple[list[int], list[int]]:
    key = (width, height)
    cached = _coord_cache.get(key)
    if cached is None:
        cached = kernels.coord_lists(width, height)
        _coord_cache[key] = cached
    return cached


def attr_raw(g: Grid, a: str):
    """Attribute value; x/y/c return shared lists that callers must not mutate."""
    if a == "x":
        return _coords(g.width, g.height)[0]
    if a == "y":
        return _coords(g.width, g.height)[1]
    if a == "c":
        return list(g.cells)
    if a == "width":
        return g.width
    if a == "height":
        return g.height
    if a == "max_x":
        return g.width - 1
    if a == "max_y":
        return g.height - 1
    if a == "ul_x":
        return g.ul_x
    if a == "ul_y":
        return g.ul_y
    raise ValueError(f"unknown attribute {a!r}")


def attr(g: Grid, a: str):
    """Grid attribute lookup; list attributes come back as fresh lists."""
    value = attr_raw(g, a)
    return list(value) if a in ("x", "y") else value


def grids_equal(a: Grid, b: Grid) -> bool:
    """Rendered equality: same dimensions and cells; ul offsets are ignored."""
    return a.width == b.width and a.height == b.height and a.cells == b.cells
