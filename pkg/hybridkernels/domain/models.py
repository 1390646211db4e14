"""Domain value types for hybridkernels.

All models are immutable (frozen dataclasses) so they can be shared freely
between the executors, the simulator and the CLI.
"""

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

from hybridkernels.domain.errors import (
    CacheConfigError,
    RankVectorError,
    ShapeError,
    UnsupportedContractionError,
)
from hybridkernels.domain.settings import CacheSettings


@dataclass(frozen=True, slots=True)
class ExecMetrics:
    """Measured cost of one instrumented run.

    ``peak_space`` (Sinf) counts every resident buffer the tree touches plus
    the peak of run-time allocations. ``peak_workspace`` leaves out buffers
    that are only read, so it measures outputs plus auxiliaries.
    """

    work: int  # T1
    span: int  # Tinf
    peak_space: int  # Sinf
    forks: int
    mult_adds: int = 0
    peak_workspace: int = 0
    leaf_count: int = 0

    def __post_init__(self) -> None:
        """Validate metric consistency."""
        if min(self.work, self.span, self.peak_space, self.forks) < 0:
            raise ValueError("Metrics must be nonnegative")
        if self.span > self.work:
            raise ValueError(f"Span {self.span} exceeds work {self.work}")

    @property
    def parallelism(self) -> float:
        """T1 / Tinf."""
        return self.work / self.span if self.span else 0.0

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True, slots=True)
class CacheConfig:
    """Fully associative LRU cache of M words in lines of B words."""

    capacity: int  # M
    line_size: int  # B
    alpha: float = 1.0
    tall_cache: bool = True

    def __post_init__(self) -> None:
        """Validate cache geometry."""
        if self.line_size < 1:
            raise CacheConfigError("Line size must be positive", f"B={self.line_size}")
        if self.capacity < self.line_size:
            raise CacheConfigError(
                "Cache smaller than one line", f"M={self.capacity}, B={self.line_size}"
            )
        if self.tall_cache and self.capacity < self.line_size**2:
            raise CacheConfigError(
                "Tall-cache assumption M >= B^2 violated",
                f"M={self.capacity}, B={self.line_size}",
            )
        if self.alpha <= 0:
            raise CacheConfigError("alpha must be positive", f"alpha={self.alpha}")

    @property
    def lines(self) -> int:
        """Number of lines M/B."""
        return self.capacity // self.line_size

    @classmethod
    def from_settings(cls, settings: CacheSettings) -> "CacheConfig":
        return cls(
            capacity=settings.capacity,
            line_size=settings.line_size,
            alpha=settings.alpha,
            tall_cache=settings.enforce_tall_cache,
        )

    def with_updates(self, **changes: Any) -> "CacheConfig":
        """Create new instance with updated fields."""
        current = asdict(self)
        current.update(changes)
        return CacheConfig(**current)


@dataclass(frozen=True, slots=True)
class RankVector:
    """Axis permutation r_1..r_d (1-based) for tensor transposition.

    Transposing R by r gives W with W[x_1..x_d] = R[x_{r_1}..x_{r_d}]: axis j
    of R becomes axis r_j of W.
    """

    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        """Validate bijectivity over 1..d."""
        if sorted(self.ranks) != list(range(1, len(self.ranks) + 1)):
            raise RankVectorError("Rank vector is not a permutation", f"got {list(self.ranks)}")

    @classmethod
    def create(cls, ranks: Sequence[int]) -> "RankVector":
        return cls(tuple(int(r) for r in ranks))

    @classmethod
    def identity(cls, order: int) -> "RankVector":
        return cls(tuple(range(1, order + 1)))

    @classmethod
    def parse(cls, text: str) -> "RankVector":
        """Parse "2,1,5,4,3"."""
        try:
            return cls.create([int(part) for part in text.split(",") if part.strip()])
        except ValueError as e:
            raise RankVectorError("Rank vector must be comma-separated integers", text) from e

    @property
    def order(self) -> int:
        return len(self.ranks)

    def inverse(self) -> "RankVector":
        """Rank vector that undoes this transposition."""
        inv = [0] * self.order
        for axis, rank in enumerate(self.ranks, start=1):
            inv[rank - 1] = axis
        return RankVector(tuple(inv))

    def source_halves(self, target_halves: Sequence[int]) -> tuple[int, ...]:
        """Orthant of R that feeds orthant ``target_halves`` of W."""
        if len(target_halves) != self.order:
            raise ShapeError("Orthant selector length must equal the order")
        return tuple(target_halves[rank - 1] for rank in self.ranks)

    def numpy_axes(self) -> tuple[int, ...]:
        """Axes argument for numpy.transpose producing W from R."""
        axes = [0] * self.order
        for axis, rank in enumerate(self.ranks):
            axes[rank - 1] = axis
        return tuple(axes)


IndexLabel = tuple[str, int]  # ("i" | "j" | "k", 1-based position in its group)


def _labels(group: str, count: int) -> tuple[IndexLabel, ...]:
    return tuple((group, position) for position in range(1, count + 1))


def parse_labels(text: str) -> tuple[IndexLabel, ...]:
    """Parse "i1,k1,i2,k2" into index labels."""
    labels: list[IndexLabel] = []
    for part in text.split(","):
        token = part.strip()
        if len(token) < 2 or token[0] not in "ijk" or not token[1:].isdigit():
            raise ShapeError("Index labels look like i1, j2 or k1", f"got {token!r}")
        labels.append((token[0], int(token[1:])))
    return tuple(labels)


def format_labels(labels: Sequence[IndexLabel]) -> str:
    return ",".join(f"{group}{position}" for group, position in labels)


@dataclass(frozen=True, slots=True)
class ContractionSpec:
    """Index groups of a contraction X{i,j} = sum_k U{i,k} V{k,j}.

    X always has axes (i_1..i_u, j_1..j_v). U and V may list their labels in
    any order; the canonical layouts are (i.., k..) for U and (k.., j..) for V.
    """

    u: int
    v: int
    x: int
    u_axes: tuple[IndexLabel, ...] = field(default=())
    v_axes: tuple[IndexLabel, ...] = field(default=())

    def __post_init__(self) -> None:
        """Validate group sizes and axis labelling."""
        if min(self.u, self.v, self.x) < 1:
            raise UnsupportedContractionError(
                "Every index group needs at least one axis",
                f"u={self.u}, v={self.v}, x={self.x}",
            )
        if not self.u_axes:
            object.__setattr__(self, "u_axes", self.canonical_u())
        if not self.v_axes:
            object.__setattr__(self, "v_axes", self.canonical_v())
        if sorted(self.u_axes) != sorted(self.canonical_u()):
            raise ShapeError("U axes must be i1..iu and k1..kx", format_labels(self.u_axes))
        if sorted(self.v_axes) != sorted(self.canonical_v()):
            raise ShapeError("V axes must be k1..kx and j1..jv", format_labels(self.v_axes))

    @classmethod
    def create(
        cls,
        u: int,
        v: int,
        x: int,
        u_axes: Optional[str] = None,
        v_axes: Optional[str] = None,
    ) -> "ContractionSpec":
        """Factory accepting label strings like "i1,k1,i2,k2"."""
        return cls(
            u,
            v,
            x,
            parse_labels(u_axes) if u_axes else (),
            parse_labels(v_axes) if v_axes else (),
        )

    @property
    def w(self) -> int:
        """Dimension of the computation cube."""
        return self.u + self.v + self.x

    def canonical_x(self) -> tuple[IndexLabel, ...]:
        return _labels("i", self.u) + _labels("j", self.v)

    def canonical_u(self) -> tuple[IndexLabel, ...]:
        return _labels("i", self.u) + _labels("k", self.x)

    def canonical_v(self) -> tuple[IndexLabel, ...]:
        return _labels("k", self.x) + _labels("j", self.v)

    def all_labels(self) -> tuple[IndexLabel, ...]:
        """Loop labels in canonical nesting order i.., j.., k.."""
        return _labels("i", self.u) + _labels("j", self.v) + _labels("k", self.x)

    def u_rank_vector(self) -> RankVector:
        """Rank vector moving U to (i.., k..)."""
        target = self.canonical_u()
        return RankVector(tuple(target.index(label) + 1 for label in self.u_axes))

    def v_rank_vector(self) -> RankVector:
        """Rank vector moving V to (k.., j..)."""
        target = self.canonical_v()
        return RankVector(tuple(target.index(label) + 1 for label in self.v_axes))

    def halves_for(
        self, axes: Sequence[IndexLabel], choice: dict[IndexLabel, int]
    ) -> tuple[int, ...]:
        """Per-axis half selectors of a tensor from per-label choices."""
        return tuple(choice[label] for label in axes)


@dataclass(frozen=True, slots=True)
class Prediction:
    """Recurrence evaluation of one algorithm with unit constants."""

    algo: str
    params: dict[str, float]
    t1: float
    tinf: float
    sinf: float
    q1: float
    q1_branch: Optional[str] = None  # "A" or "B" for MM-HD
    supersteps: Optional[float] = None  # N_inf for RMM-OPT
    base_shape: Optional[tuple[int, int, int]] = None
    notes: tuple[str, ...] = ()

    def parallel_cache_misses(self, processors: int, capacity: int, line_size: int) -> float:
        """Q_p = Q1 + p * Tinf * (M / B)."""
        if processors < 1:
            raise ValueError("Processor count must be positive")
        return self.q1 + processors * self.tinf * capacity / line_size

    def cache_optimal_processors(self, capacity: int, line_size: int) -> float:
        """Largest p for which p * Tinf * M / B stays within Q1."""
        if self.tinf <= 0:
            return 0.0
        return self.q1 * line_size / (self.tinf * capacity)

    def as_row(self) -> dict[str, Any]:
        """Flat dict for CSV export."""
        row: dict[str, Any] = {"algo": self.algo}
        for key in ("n", "r", "u", "v", "x", "a", "b", "c", "M", "B"):
            row[key] = self.params.get(key, "")
        row.update(
            {
                "T1": _fmt(self.t1),
                "Tinf": _fmt(self.tinf),
                "Sinf": _fmt(self.sinf),
                "Q1": _fmt(self.q1),
                "Q1_branch": self.q1_branch or "",
                "supersteps": _fmt(self.supersteps) if self.supersteps is not None else "",
                "base_shape": "x".join(map(str, self.base_shape)) if self.base_shape else "",
                "notes": ";".join(self.notes),
            }
        )
        return row


def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.6g}"
