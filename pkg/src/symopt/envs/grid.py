"""ASCII grid maps.

A map of W x H cells is written as 2H-1 lines of 2W-1 characters; wall
rows may be right-trimmed. Cells sit at even (column, row) positions, the
characters between two cells are wall slots (``#`` blocks the move, space
leaves it open) and odd/odd positions are corners (``#``, ``+`` or space,
ignored).

Cell glyphs::

    .  plain        C  coffee     M  mail      O  office
    *  decoration   K  key        D  door      L  ladder
    S  plain cell marking the fixed start
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

CELL_GLYPHS = {
    ".": "plain",
    "C": "coffee",
    "M": "mail",
    "O": "office",
    "*": "decoration",
    "K": "key",
    "D": "door",
    "L": "ladder",
    "S": "plain",
}
SLOT_GLYPHS = {"#", " "}
CORNER_GLYPHS = {"#", " ", "+"}

# (dx, dy) per low-level action; y grows downwards
MOVES = ((0, -1), (0, 1), (-1, 0), (1, 0))
ACTION_NAMES = ("up", "down", "left", "right")


class MapParseError(ValueError):
    def __init__(self, row: int, col: int, reason: str):
        self.row, self.col = row, col
        super().__init__(f"row {row}, column {col}: {reason}")


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    walls: frozenset = frozenset()  # frozenset of frozenset({cell_a, cell_b})
    labels: dict = field(default_factory=dict)  # (x, y) -> marker; plain cells omitted
    start: tuple | None = None

    def __post_init__(self):
        for (x, y) in self.labels:
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"label at {(x, y)} out of bounds")

    def cells(self, marker: str) -> list[tuple[int, int]]:
        return sorted((c for c, m in self.labels.items() if m == marker), key=lambda c: (c[0], c[1]))

    def label(self, cell) -> str:
        return self.labels.get(cell, "plain")

    def in_bounds(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def blocked(self, a, b) -> bool:
        return (not self.in_bounds(b) or frozenset((a, b)) in self.walls
                or self.labels.get(b) == "decoration")

    def move(self, cell, action: int):
        dx, dy = MOVES[action]
        nxt = (cell[0] + dx, cell[1] + dy)
        return cell if self.blocked(cell, nxt) else nxt

    def free_cells(self) -> list[tuple[int, int]]:
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if self.labels.get((x, y)) != "decoration"]

    def reachable(self, origin) -> set:
        seen = {origin}
        stack = [origin]
        while stack:
            c = stack.pop()
            for a in range(4):
                n = self.move(c, a)
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen


def parse_map(text: str) -> GridMap:
    lines = text.strip("\n").split("\n")
    if not lines or not lines[0]:
        raise MapParseError(0, 0, "empty map")
    ncols = len(lines[0])
    for r, ln in enumerate(lines):
        if r % 2 == 1 and len(ln) < ncols:
            # wall rows may lose trailing blanks
            lines[r] = ln = ln.ljust(ncols)
        if len(ln) != ncols:
            raise MapParseError(r, min(len(ln), ncols), f"ragged row: {len(ln)} characters, expected {ncols}")
    if ncols % 2 == 0 or len(lines) % 2 == 0:
        raise MapParseError(len(lines) - 1, ncols - 1, "map needs an odd number of rows and columns")
    width, height = (ncols + 1) // 2, (len(lines) + 1) // 2
    labels: dict = {}
    walls = set()
    start = None
    for r, ln in enumerate(lines):
        for c, ch in enumerate(ln):
            if r % 2 == 0 and c % 2 == 0:
                if ch not in CELL_GLYPHS:
                    raise MapParseError(r, c, f"unknown cell glyph {ch!r}")
                cell = (c // 2, r // 2)
                if ch == "S":
                    if start is not None:
                        raise MapParseError(r, c, "more than one start cell")
                    start = cell
                elif CELL_GLYPHS[ch] != "plain":
                    labels[cell] = CELL_GLYPHS[ch]
            elif r % 2 == 1 and c % 2 == 1:
                if ch not in CORNER_GLYPHS:
                    raise MapParseError(r, c, f"unknown corner glyph {ch!r}")
            else:
                if ch not in SLOT_GLYPHS:
                    raise MapParseError(r, c, f"unknown wall glyph {ch!r}")
                if ch == "#":
                    if r % 2 == 0:  # between horizontally adjacent cells
                        a, b = ((c - 1) // 2, r // 2), ((c + 1) // 2, r // 2)
                    else:
                        a, b = (c // 2, (r - 1) // 2), (c // 2, (r + 1) // 2)
                    walls.add(frozenset((a, b)))
    return GridMap(width, height, frozenset(walls), labels, start)


def load_default_map(name: str) -> GridMap:
    return parse_map(resources.files("symopt.envs").joinpath("maps", f"{name}.txt").read_text())


def render(grid: GridMap) -> str:
    inv = {v: k for k, v in CELL_GLYPHS.items() if v != "plain"}
    rows = []
    for r in range(2 * grid.height - 1):
        row = []
        for c in range(2 * grid.width - 1):
            if r % 2 == 0 and c % 2 == 0:
                cell = (c // 2, r // 2)
                row.append("S" if cell == grid.start else inv.get(grid.labels.get(cell), "."))
            elif r % 2 == 1 and c % 2 == 1:
                row.append("+" if _corner_has_wall(grid, c // 2, r // 2) else " ")
            elif r % 2 == 0:
                a, b = ((c - 1) // 2, r // 2), ((c + 1) // 2, r // 2)
                row.append("#" if frozenset((a, b)) in grid.walls else " ")
            else:
                a, b = (c // 2, (r - 1) // 2), (c // 2, (r + 1) // 2)
                row.append("#" if frozenset((a, b)) in grid.walls else " ")
        rows.append("".join(row).rstrip() if r % 2 else "".join(row))
    return "\n".join(rows) + "\n"


def _corner_has_wall(grid: GridMap, x: int, y: int) -> bool:
    # corner joins cells (x, y), (x+1, y), (x, y+1), (x+1, y+1)
    edges = [((x, y), (x + 1, y)), ((x, y + 1), (x + 1, y + 1)),
             ((x, y), (x, y + 1)), ((x + 1, y), (x + 1, y + 1))]
    return any(frozenset(e) in grid.walls for e in edges)
