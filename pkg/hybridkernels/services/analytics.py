"""Predicted costs from the recurrences of each algorithm.

Every Theta constant is set to one. Recurrences stop where the kernels
stop: at the serial leaf threshold ``base`` for the matrix kernels and at
the leaf ``footprint`` for contraction and the transforms, both taken
from the parameters (defaults 1 and 3, scalar leaves). Fits-in-cache
tests compare against alpha M. Predictions agree with measurements in
growth, not in value; the trade-off table sets both side by side for
MM-OPT.
"""

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from hybridkernels.domain.errors import InvalidPlaneCountError, ShapeError, UnknownAlgorithmError
from hybridkernels.domain.models import CacheConfig, Prediction
from hybridkernels.domain.ring import ModularRing
from hybridkernels.domain.tensors import Matrix, PlaneSet, is_power_of_two
from hybridkernels.engine.instrumented import CostModel, run_instrumented
from hybridkernels.kernels.config import KernelConfig
from hybridkernels.kernels.mm import mm_opt
from hybridkernels.services.cache_sim import simulate

logger = logging.getLogger(__name__)

Params = Mapping[str, float]

DEFAULT_M = 2048
DEFAULT_B = 8
DEFAULT_BASE = 1
DEFAULT_FOOTPRINT = 3

# Spans are compared against the recurrences at scalar leaves
SPAN_CONFIG = KernelConfig(base=1)


def _log2(value: float) -> float:
    return math.log2(value) if value > 1 else 0.0


# --- square matrix multiplication -------------------------------------------------


@lru_cache(maxsize=None)
def _mm_t1(n: int, base: int = 1) -> int:
    return n**3 if n <= base else 8 * _mm_t1(n // 2, base) + 1


@lru_cache(maxsize=None)
def _mm_tinf(n: int, base: int = 1) -> int:
    return n**3 if n <= base else 2 * _mm_tinf(n // 2, base) + 1


@lru_cache(maxsize=None)
def _mm_q1(n: int, capacity: float, line: int) -> float:
    if n * n <= capacity or n == 1:
        return n * n / line + n
    return 8 * _mm_q1(n // 2, capacity, line) + 1


@lru_cache(maxsize=None)
def _hd_t1(n: int, r: int, base: int = 1) -> float:
    return _mm_t1(n, base) if r == 1 else 8 * _hd_t1(n // 2, r // 2, base) + n * n


@lru_cache(maxsize=None)
def _hd_tinf(n: int, r: int, block: int, base: int = 1) -> float:
    if r == 1:
        return _mm_tinf(n, base)
    return _hd_tinf(n // 2, r // 2, block, base) + _log2(n) + block


@lru_cache(maxsize=None)
def _hd_aux(n: int, r: int) -> float:
    return 0 if r == 1 else n * n + 8 * _hd_aux(n // 2, r // 2)


@lru_cache(maxsize=None)
def _hd_q1_a(n: int, r: int, capacity: float, line: int) -> float:
    if r == 1:
        return _mm_q1(n, capacity, line)
    return 8 * _hd_q1_a(n // 2, r // 2, capacity, line) + (n * n / line + n)


def _hd_q1_b(n: int, r: int, capacity: float, line: int) -> tuple[float, int]:
    """Expand until the r n^2 live footprint fits; return (Q1, stop level)."""
    level = 0
    total = 0.0
    calls = 1
    while r > 1 and r * n * n > capacity:
        total += calls * (n * n / line + n)
        calls *= 8
        n //= 2
        r //= 2
        level += 1
    total += calls * (r * n * n / line + n)
    return total, level


def _opt_prime(
    n: int, r: int, capacity: float, line: int, base: int = 1
) -> tuple[float, float, float]:
    if r == 1:
        return _mm_t1(n, base), _mm_tinf(n, base), _mm_q1(n, capacity, line)
    t1, tinf, q1 = _opt_prime(n // 2, r // 2, capacity, line, base)
    return 8 * t1 + 1, tinf + 1, 8 * q1 + 1


def _require(params: Params, *names: str) -> list[int]:
    missing = [name for name in names if name not in params]
    if missing:
        raise ShapeError("Missing prediction parameters", ", ".join(missing))
    values = [int(params[name]) for name in names]
    for name, value in zip(names, values, strict=True):
        if name in ("n", "a", "b", "c", "r") and not is_power_of_two(value):
            raise ShapeError(f"{name} must be a power of two", f"got {value}")
    return values


def _plane_count(params: Params, limit: int, default: int = 1) -> int:
    r = int(params.get("r", default))
    if not is_power_of_two(r) or r > limit:
        raise InvalidPlaneCountError("Plane count must be a power of two in range", f"r={r}")
    return r


def _cache(params: Params) -> tuple[float, int]:
    """(alpha M, B) from the parameters."""
    alpha = float(params.get("alpha", 1.0))
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return alpha * float(params.get("M", DEFAULT_M)), int(params.get("B", DEFAULT_B))


def _leaf_sizes(params: Params) -> tuple[int, int]:
    """(base, footprint) leaf thresholds from the parameters."""
    base = int(params.get("base", DEFAULT_BASE))
    footprint = int(params.get("footprint", DEFAULT_FOOTPRINT))
    if base < 1 or footprint < 1:
        raise ValueError(f"leaf thresholds must be positive: base={base}, footprint={footprint}")
    return base, footprint


def _predict_mm(params: Params) -> Prediction:
    (n,) = _require(params, "n")
    capacity, line = _cache(params)
    base, _ = _leaf_sizes(params)
    return Prediction(
        algo="mm",
        params=dict(params),
        t1=_mm_t1(n, base),
        tinf=_mm_tinf(n, base),
        sinf=n * n,
        q1=_mm_q1(n, capacity, line),
    )


def _predict_mm_hd(params: Params, algo: str = "mm-hd") -> Prediction:
    (n,) = _require(params, "n")
    r = _plane_count(params, n)
    capacity, line = _cache(params)
    base, _ = _leaf_sizes(params)
    branch = "A" if r < n / math.sqrt(capacity) else "B"
    notes: list[str] = []
    if branch == "A":
        q1 = _hd_q1_a(n, r, capacity, line)
    else:
        q1, level = _hd_q1_b(n, r, capacity, line)
        notes.append(f"B-branch stops at level {level}")
    return Prediction(
        algo=algo,
        params={**params, "r": r},
        t1=_hd_t1(n, r, base),
        tinf=_hd_tinf(n, r, line, base),
        sinf=n * n + _hd_aux(n, r),
        q1=q1,
        q1_branch=branch,
        notes=tuple(notes),
    )


def _predict_mm_opt(params: Params, algo: str = "mm-opt") -> Prediction:
    (n,) = _require(params, "n")
    r = _plane_count(params, n)
    capacity, line = _cache(params)
    if r == 1:
        single = _predict_mm(params)
        return Prediction(algo, {**params, "r": 1}, single.t1, single.tinf, single.sinf, single.q1)
    base, _ = _leaf_sizes(params)
    t1, tinf, q1 = _opt_prime(n, r, capacity, line, base)
    return Prediction(
        algo=algo,
        params={**params, "r": r},
        t1=t1 + r * n * n,
        tinf=tinf + _log2(n) + line,
        sinf=r * n * n,
        q1=q1 + r * n * n / line + r * n,
    )


def _predict_mm_nd(params: Params) -> Prediction:
    (n,) = _require(params, "n")
    return _predict_mm_hd({**params, "r": n}, algo="mm-nd")


def _predict_mm_ns(params: Params) -> Prediction:
    (n,) = _require(params, "n")
    return _predict_mm_opt({**params, "r": n}, algo="mm-ns")


# --- rectangular multiplication ---------------------------------------------------


def _split(a: int, b: int, c: int) -> str:
    if a >= max(b, c):
        return "a"
    if b >= max(a, c):
        return "b"
    return "c"


def _halve(a: int, b: int, c: int, axis: str) -> tuple[int, int, int]:
    halves = {"a": (a // 2, b, c), "b": (a, b // 2, c), "c": (a, b, c // 2)}
    return halves[axis]


@lru_cache(maxsize=None)
def _rmm(
    a: int, b: int, c: int, capacity: float, line: int, base: int = 1
) -> tuple[float, float, float]:
    """(T1, Tinf, Q1) of plain rectangular multiplication."""
    footprint = a * b + b * c + a * c
    if max(a, b, c) <= base:
        return a * b * c, a * b * c, footprint / line + 1
    axis = _split(a, b, c)
    t1, tinf, q1 = _rmm(*_halve(a, b, c, axis), capacity, line, base)
    q1 = footprint / line + 1 if footprint <= capacity else 2 * q1 + 1
    if axis == "b":
        return 2 * t1 + 1, 2 * tinf + 1, q1
    return 2 * t1 + 1, tinf + 1, q1


def base_shape(a: int, b: int, c: int, r: int) -> tuple[int, int, int]:
    """Shape of the single-plane subproblems of rmm_opt with r planes."""
    if r == 1:
        return a, b, c
    inner = b // r
    return min(a, inner), inner, min(c, inner)


def _predict_rmm(params: Params) -> Prediction:
    a, b, c = _require(params, "a", "b", "c")
    capacity, line = _cache(params)
    base, _ = _leaf_sizes(params)
    t1, tinf, q1 = _rmm(a, b, c, capacity, line, base)
    return Prediction(algo="rmm", params=dict(params), t1=t1, tinf=tinf, sinf=a * c, q1=q1)


def _predict_rmm_opt(params: Params) -> Prediction:
    a, b, c = _require(params, "a", "b", "c")
    r = _plane_count(params, b)
    capacity, line = _cache(params)
    base, _ = _leaf_sizes(params)
    shape = base_shape(a, b, c, r)
    t1_base, tinf_base, q1_base = _rmm(*shape, capacity, line, base)
    leaves = r * a * c / (shape[0] * shape[2])
    # levels of plane splitting and output splitting above the base shape
    levels = int(round(math.log2(leaves)))
    reduce_span = (_log2(a) + _log2(c) + min(line, c) + _log2(r)) if r > 1 else 0
    return Prediction(
        algo="rmm-opt",
        params={**params, "r": r},
        t1=leaves * t1_base + (leaves - 1) + (r * a * c if r > 1 else 0),
        tinf=tinf_base + levels + reduce_span,
        sinf=r * a * c,
        q1=leaves * q1_base + (r * a * c / line if r > 1 else 0),
        supersteps=b / r + _log2(r * a * c),
        base_shape=shape,
    )


# --- tensor contraction and transforms --------------------------------------------


def _groups(params: Params) -> tuple[int, int, int, int]:
    n, u, v, x = _require(params, "n", "u", "v", "x")
    if min(u, v, x) < 1:
        raise ShapeError("Index groups must be nonempty", f"u={u}, v={v}, x={x}")
    return n, u, v, x


@lru_cache(maxsize=None)
def _tc(
    n: int, u: int, v: int, x: int, capacity: float, line: int, leaf: int = DEFAULT_FOOTPRINT
) -> tuple[float, float, float]:
    w = u + v + x
    footprint = n ** (u + v) + n ** (u + x) + n ** (v + x)
    if n == 1 or footprint <= leaf:
        return n**w, n**w, footprint / line + 1
    t1, tinf, q1 = _tc(n // 2, u, v, x, capacity, line, leaf)
    q1 = footprint / line + 1 if footprint <= capacity else 2**w * q1 + 1
    return 2**w * t1 + 1, 2**x * (tinf + (u + v)), q1


def _predict_tc(params: Params) -> Prediction:
    n, u, v, x = _groups(params)
    capacity, line = _cache(params)
    _, leaf = _leaf_sizes(params)
    t1, tinf, q1 = _tc(n, u, v, x, capacity, line, leaf)
    return Prediction(algo="tc", params=dict(params), t1=t1, tinf=tinf, sinf=n ** (u + v), q1=q1)


def _predict_tc_hs(params: Params) -> Prediction:
    n, u, v, x = _groups(params)
    r = int(params.get("r", 1))
    exponent = int(math.log2(r)) if is_power_of_two(r) else -1
    if exponent < 0 or exponent % x or exponent // x > _log2(n):
        raise InvalidPlaneCountError("Plane count must be (2^x)^i", f"r={r}, x={x}")
    capacity, line = _cache(params)
    _, leaf = _leaf_sizes(params)
    w = u + v + x
    depth = exponent // x
    t1, tinf, q1 = _tc(n >> depth, u, v, x, capacity, line, leaf)
    for _ in range(depth):
        t1, tinf, q1 = 2**w * t1 + 1, tinf + w, 2**w * q1 + 1
    out = n ** (u + v)
    if r > 1:
        t1 += r * out
        tinf += (u + v) * _log2(n) + line
        q1 += r * out / line
    return Prediction(
        algo="tc-hs", params={**params, "r": r}, t1=t1, tinf=tinf, sinf=r * out, q1=q1
    )


def _move_span(n: int, order: int, leaf: int) -> float:
    """Span of an orthant-recursive move: one level per halving, then a serial leaf."""
    levels = 0
    while n > 1 and 2 * n**order > leaf:
        n //= 2
        levels += 1
    return order * levels + n**order


def _predict_tt(params: Params) -> Prediction:
    n, d = _require(params, "n", "d")
    _, leaf = _leaf_sizes(params)
    size = n**d
    return Prediction(
        algo="tt",
        params=dict(params),
        t1=size,
        tinf=_move_span(n, d, leaf),
        sinf=2 * size,
        q1=2 * size / _cache(params)[1],
    )


def _predict_tf(params: Params) -> Prediction:
    n, rows, cols = _require(params, "n", "s1", "s2")
    _, leaf = _leaf_sizes(params)
    size = n ** (rows + cols)
    return Prediction(
        algo="tf",
        params=dict(params),
        t1=size,
        tinf=_move_span(n, rows + cols, leaf),
        sinf=2 * size,
        q1=2 * size / _cache(params)[1],
    )


def _predict_tc_mm_opt(params: Params) -> Prediction:
    n, u, v, x = _groups(params)
    r = _plane_count(params, n**x)
    a, b, c = n**u, n**x, n**v
    inner = _predict_rmm_opt({**params, "a": a, "b": b, "c": c, "r": r})
    moved = 2 * (a * b + b * c) + a * c
    line = _cache(params)[1]
    return Prediction(
        algo="tc-mm-opt",
        params={**params, "r": r},
        t1=inner.t1 + moved,
        tinf=n**x / r + (u + v + x) * _log2(n) + _log2(r),
        sinf=2 * (a * b + b * c) + r * a * c + a * c,
        q1=inner.q1 + 2 * moved / line,
        supersteps=inner.supersteps,
        base_shape=inner.base_shape,
    )


ALGORITHMS: dict[str, Callable[[Params], Prediction]] = {
    "mm": _predict_mm,
    "mm-hd": _predict_mm_hd,
    "mm-opt": _predict_mm_opt,
    "mm-nd": _predict_mm_nd,
    "mm-ns": _predict_mm_ns,
    "rmm": _predict_rmm,
    "rmm-opt": _predict_rmm_opt,
    "tc": _predict_tc,
    "tc-hs": _predict_tc_hs,
    "tt": _predict_tt,
    "tf": _predict_tf,
    "tc-mm-opt": _predict_tc_mm_opt,
}


def normalize_algo(name: str) -> str:
    return name.strip().lower().replace("_", "-")


def predict(algo: str, params: Params) -> Prediction:
    """Evaluate the cost recurrences of one algorithm.

    Args:
        algo: Algorithm id such as "mm", "mm-opt" or "tc-hs"
        params: Sizes (n, r, u, v, x, a, b, c, d, s1, s2), cache M, B and
            alpha, and the leaf thresholds base and footprint

    Returns:
        Prediction with T1, Tinf, Sinf and Q1 under unit constants

    Raises:
        UnknownAlgorithmError: If algo is not registered

    Example:
        >>> predict("mm", {"n": 8}).t1
        585
        >>> predict("mm", {"n": 16, "base": 8}).tinf
        1025
    """
    key = normalize_algo(algo)
    evaluator = ALGORITHMS.get(key)
    if evaluator is None:
        raise UnknownAlgorithmError(f"No predictor for {algo!r}", ", ".join(sorted(ALGORITHMS)))
    return evaluator(params)


def config_params(config: KernelConfig) -> dict[str, float]:
    """Leaf thresholds of a kernel configuration as prediction parameters."""
    return {"base": config.base, "footprint": config.tc_base_footprint}


@dataclass(frozen=True, slots=True)
class TradeoffRow:
    """One plane count of the MM-OPT space/span sweep."""

    r: int
    space: int
    predicted_span: float
    measured_span: int
    measured_q1: Optional[int]
    dominant_term: str

    def as_row(self) -> dict[str, object]:
        return {
            "r": self.r,
            "space": self.space,
            "predicted_span": f"{self.predicted_span:.6g}",
            "measured_span": self.measured_span,
            "measured_q1": "" if self.measured_q1 is None else self.measured_q1,
            "dominant_term": self.dominant_term,
        }


def dominant_term(n: int, r: int) -> str:
    """Which part of n/r + log n + B bounds the span."""
    return "n/r" if n / r > _log2(n) else "log n + B"


def tradeoff_table(
    n: int,
    plane_counts: Sequence[int],
    cache: CacheConfig,
    config: KernelConfig = SPAN_CONFIG,
    cost: Optional[CostModel] = None,
    *,
    seed: int = 42,
    measure_cache: bool = True,
) -> list[TradeoffRow]:
    """Run MM-OPT for each r and compare against the predicted span.

    The prediction uses the same leaf threshold as the measured tree. At
    scalar leaves (the default) the measured span is nonincreasing in r.

    Args:
        n: Matrix side
        plane_counts: Plane counts to sweep, each a power of two <= n
        cache: Cache geometry for the measured and predicted Q1
        config: Kernel thresholds
        cost: Unit costs for the measured span
        seed: Seed for the random operands
        measure_cache: Record traces and simulate Q1

    Returns:
        One row per r in the order given
    """
    ring = ModularRing()
    rng = np.random.default_rng(seed)
    u = Matrix.from_array(ring.random(rng, (n, n)), ring)
    v = Matrix.from_array(ring.random(rng, (n, n)), ring)
    cache_params = {"M": cache.capacity, "B": cache.line_size, "alpha": cache.alpha}
    rows = []
    for r in plane_counts:
        planes = PlaneSet.matrices(r, n, n, ring)
        tree = mm_opt(planes, u, v, config)
        run = run_instrumented(tree, cost, execute=False, record_trace=measure_cache)
        q1 = simulate(run.trace, cache).misses if run.trace is not None else None
        prediction = predict("mm-opt", {"n": n, "r": r, **cache_params, **config_params(config)})
        rows.append(
            TradeoffRow(
                r=r,
                space=r * n * n,
                predicted_span=prediction.tinf,
                measured_span=run.metrics.span,
                measured_q1=q1,
                dominant_term=dominant_term(n, r),
            )
        )
        logger.info("tradeoff n=%d r=%d: span %d, Q1 %s", n, r, run.metrics.span, q1)
    return rows
