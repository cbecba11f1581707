"""Hetero-functional incidence matrices.

Rows are operand-at-buffer places in six blocks (water then nitrogen, each
split lake / land / point); columns are capabilities in the ten class
blocks. ``Mminus[p, c] = 1`` when capability ``c`` pulls operand out of
place ``p``; ``Mplus`` records injection. Both are stored as coordinate
triplets sorted by (column, row).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .architecture import (
    BUFFER_CLASS_ORDER,
    CAPABILITY_BLOCK_ORDER,
    CapabilityClass,
    CapabilityKind,
    InstantiatedArchitecture,
)

DENSE_LIMIT = 10_000

# (place block, capability block) pairs allowed to be nonzero in M, 1-based.
NONZERO_BLOCKS = frozenset({
    (1, 1), (1, 4), (1, 7), (1, 9),
    (2, 2), (2, 5), (2, 7),
    (3, 6), (3, 9),
    (4, 4), (4, 8), (4, 10),
    (5, 3), (5, 5), (5, 8),
    (6, 6), (6, 10),
})


class SparseMatrix:
    """Immutable COO matrix with entries sorted by (column, row)."""

    __slots__ = ("rows", "cols", "vals", "shape")

    def __init__(self, rows, cols, vals, shape):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        keep = vals != 0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        order = np.lexsort((rows, cols))
        self.rows, self.cols, self.vals = rows[order], cols[order], vals[order]
        for a in (self.rows, self.cols, self.vals):
            a.setflags(write=False)
        self.shape = (int(shape[0]), int(shape[1]))

    @classmethod
    def from_entries(cls, entries, shape):
        """Build from ``{(row, col): value}``."""
        if not entries:
            return cls([], [], [], shape)
        (rows, cols), vals = zip(*entries.keys()), list(entries.values())
        return cls(rows, cols, vals, shape)

    @property
    def nnz(self) -> int:
        return len(self.vals)

    def triplets(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))

    def __eq__(self, other):
        return isinstance(other, SparseMatrix) and self.shape == other.shape and self.triplets() == other.triplets()

    def __sub__(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        acc: dict[tuple[int, int], float] = {}
        for r, c, v in self.triplets():
            acc[r, c] = acc.get((r, c), 0.0) + v
        for r, c, v in other.triplets():
            acc[r, c] = acc.get((r, c), 0.0) - v
        return SparseMatrix.from_entries(acc, self.shape)

    def toarray(self, force: bool = False) -> np.ndarray:
        if not force and self.shape[0] * self.shape[1] > DENSE_LIMIT:
            raise ValueError(f"refusing dense conversion of a {self.shape} matrix")
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.vals
        return out

    def matvec(self, x) -> np.ndarray:
        out = np.zeros(self.shape[0])
        np.add.at(out, self.rows, self.vals * np.asarray(x, dtype=float)[self.cols])
        return out

    def rmatvec(self, y) -> np.ndarray:
        """Transpose product ``self.T @ y``."""
        out = np.zeros(self.shape[1])
        np.add.at(out, self.cols, self.vals * np.asarray(y, dtype=float)[self.rows])
        return out

    def submatrix(self, row_slice: slice, col_slice: slice) -> "SparseMatrix":
        r0, r1 = row_slice.start, row_slice.stop
        c0, c1 = col_slice.start, col_slice.stop
        m = (self.rows >= r0) & (self.rows < r1) & (self.cols >= c0) & (self.cols < c1)
        return SparseMatrix(self.rows[m] - r0, self.cols[m] - c0, self.vals[m], (r1 - r0, c1 - c0))

    def column(self, j) -> dict[int, float]:
        m = self.cols == j
        return dict(zip(self.rows[m].tolist(), self.vals[m].tolist()))

    def to_csv(self) -> str:
        lines = ["row,col,val"]
        lines += [f"{r},{c},{v:g}" for r, c, v in self.triplets()]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


@dataclass(frozen=True)
class PlaceIndex:
    """Ordered (operand id, buffer id) places with six block slices."""

    places: tuple[tuple[str, str], ...]
    blocks: tuple[slice, ...]  # six, in Q_B block order
    _pos: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_pos", {p: i for i, p in enumerate(self.places)})

    def __len__(self):
        return len(self.places)

    def __iter__(self):
        return iter(self.places)

    def __getitem__(self, key):
        """Row of a place: ``index[(operand, buffer)]``."""
        return self._pos[key]

    def get(self, key, default=None):
        return self._pos.get(key, default)

    @property
    def water(self) -> slice:
        return slice(self.blocks[0].start, self.blocks[2].stop)

    @property
    def nitrogen(self) -> slice:
        return slice(self.blocks[3].start, self.blocks[5].stop)

    def buffers(self) -> list[str]:
        """Buffer ids in row order of the water block."""
        return [b for _, b in self.places[self.water]]


@dataclass(frozen=True)
class CapabilityIndex:
    ids: tuple[str, ...]
    classes: tuple[CapabilityClass, ...]
    blocks: tuple[slice, ...]  # ten
    _pos: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_pos", {c: i for i, c in enumerate(self.ids)})

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __getitem__(self, cap_id):
        return self._pos[cap_id]

    def get(self, cap_id, default=None):
        return self._pos.get(cap_id, default)

    def columns_of(self, *classes: CapabilityClass) -> list[int]:
        return [i for i, c in enumerate(self.classes) if c in classes]


def _blocks(sizes):
    out, start = [], 0
    for n in sizes:
        out.append(slice(start, start + n))
        start += n
    return tuple(out)


def build_place_index(arch: InstantiatedArchitecture) -> PlaceIndex:
    """Every buffer stores both operands, so each buffer yields one water and one nitrogen place."""
    if not arch.operands:
        return PlaceIndex((), _blocks([0] * 6))
    places, sizes = [], []
    for operand in (arch.water, arch.nitrogen):
        for cls in BUFFER_CLASS_ORDER:
            members = [(operand.id, b.id) for b in arch.buffers if b.buffer_class is cls]
            places += members
            sizes.append(len(members))
    return PlaceIndex(tuple(places), _blocks(sizes))


def build_capability_index(arch: InstantiatedArchitecture) -> CapabilityIndex:
    resolved = [(c.id, arch.capability_class(c)) for c in arch.capabilities]
    ids, classes, sizes = [], [], []
    for cls in CAPABILITY_BLOCK_ORDER:
        members = [cid for cid, ccls in resolved if ccls is cls]
        ids += members
        classes += [cls] * len(members)
        sizes.append(len(members))
    return CapabilityIndex(tuple(ids), tuple(classes), _blocks(sizes))


@dataclass(frozen=True)
class IncidenceTensors:
    places: PlaceIndex
    capabilities: CapabilityIndex
    Mplus: SparseMatrix
    Mminus: SparseMatrix
    M: SparseMatrix

    def block_view(self, place_block: int, capability_block: int, which: str = "M") -> SparseMatrix:
        return block_view(self, place_block, capability_block, which)


def build_incidence(arch: InstantiatedArchitecture, places: PlaceIndex,
                    capabilities: CapabilityIndex) -> IncidenceTensors:
    plus: dict[tuple[int, int], float] = {}
    minus: dict[tuple[int, int], float] = {}
    water, nitrogen = arch.water.id, arch.nitrogen.id
    for col, cap_id in enumerate(capabilities.ids):
        cap = arch.capability(cap_id)
        if cap.kind is CapabilityKind.ACCEPT:
            plus[places[cap.operand, cap.location], col] = 1.0
        elif cap.kind is CapabilityKind.MIX:
            # net-neutral self-loop on both operand places
            for op in (water, nitrogen):
                row = places[op, cap.location]
                plus[row, col] = 1.0
                minus[row, col] = 1.0
        else:
            minus[places[cap.operand, cap.origin], col] = 1.0
            plus[places[cap.operand, cap.destination], col] = 1.0
    shape = (len(places), len(capabilities))
    Mplus = SparseMatrix.from_entries(plus, shape)
    Mminus = SparseMatrix.from_entries(minus, shape)
    return IncidenceTensors(places, capabilities, Mplus, Mminus, Mplus - Mminus)


def build_tensors(arch: InstantiatedArchitecture) -> IncidenceTensors:
    """Convenience: build both indices and the incidence matrices."""
    return build_incidence(arch, build_place_index(arch), build_capability_index(arch))


def block_view(T: IncidenceTensors, place_block: int, capability_block: int, which: str = "M") -> SparseMatrix:
    """Submatrix of block row ``place_block`` (1..6) and block column ``capability_block`` (1..10).

    ``which`` selects ``"M"``, ``"plus"`` or ``"minus"``.
    """
    if not 1 <= place_block <= 6 or not 1 <= capability_block <= 10:
        raise ValueError(f"block ({place_block}, {capability_block}) is outside 6 x 10")
    matrix = {"M": T.M, "plus": T.Mplus, "minus": T.Mminus}[which]
    return matrix.submatrix(T.places.blocks[place_block - 1], T.capabilities.blocks[capability_block - 1])


def zero_block_violations(T: IncidenceTensors) -> list[tuple[str, int, int]]:
    """Blocks that must be zero but are not, checked in M, M+ and M-."""
    bad = []
    for which in ("M", "plus", "minus"):
        for x in range(1, 7):
            for y in range(1, 11):
                if (x, y) not in NONZERO_BLOCKS and block_view(T, x, y, which).nnz:
                    bad.append((which, x, y))
    return bad
