"""Verification suites: every kernel against its reference loop.

A cell builds one kernel for one parameter set, checks the task tree for
write races, runs it on the instrumented executor and compares the result
bit-exactly (integer ring) with the reference loops. Multiply-add counts
are checked against the exact work of the problem.
"""

import logging
import zlib
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from hybridkernels.domain.errors import UnknownAlgorithmError
from hybridkernels.domain.models import RankVector
from hybridkernels.domain.ring import ModularRing, Ring
from hybridkernels.domain.tensors import Matrix, Tensor
from hybridkernels.engine.instrumented import CostModel, run_instrumented
from hybridkernels.engine.races import check_race_freedom
from hybridkernels.kernels.config import DEFAULT_CONFIG, KernelConfig
from hybridkernels.kernels.mm import mm_loop
from hybridkernels.kernels.tc import tc_loop, valid_tc_planes
from hybridkernels.kernels.transforms import FlatteningOrder
from hybridkernels.services.workloads import (
    MM_KERNELS,
    RMM_KERNELS,
    TC_KERNELS,
    TRANSFORM_KERNELS,
    Workload,
    build_workload,
    normalize_kernel,
)

logger = logging.getLogger(__name__)

SUITES = MM_KERNELS + TC_KERNELS + RMM_KERNELS + TRANSFORM_KERNELS

TC_GROUPS = ((1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 1), (2, 2, 2))
# non-canonical operand layouts, exercising the transposition route
TC_LAYOUTS = (
    ((2, 1, 1), "k1,i2,i1", "j1,k1"),
    ((2, 2, 2), "i1,k1,i2,k2", "k2,j1,k1,j2"),
)


@dataclass(frozen=True, slots=True)
class CellResult:
    """Outcome of one verification cell."""

    kernel: str
    params: dict[str, Any]
    correct: bool
    race: str = "ok"
    work_ok: bool = True
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.correct and self.race == "ok" and self.work_ok

    def describe_params(self) -> str:
        return " ".join(f"{key}={value}" for key, value in self.params.items())

    def as_row(self) -> dict[str, str]:
        return {
            "kernel": self.kernel,
            "params": self.describe_params(),
            "result": "pass" if self.passed else "FAIL",
            "race": self.race,
            "work": "ok" if self.work_ok else "mismatch",
            "detail": self.detail,
        }


RESULT_FIELDS = ("kernel", "params", "result", "race", "work", "detail")


def _powers(limit: int) -> list[int]:
    return [1 << e for e in range(limit.bit_length()) if 1 << e <= limit]


def _seed_for(seed: int, kernel: str, params: Mapping[str, Any]) -> int:
    text = f"{kernel}|{sorted(params.items())}"
    return seed ^ zlib.crc32(text.encode())


class VerificationService:
    """Runs verification cells with one ring, configuration and seed.

    Example:
        >>> service = VerificationService(seed=42)
        >>> results = service.run_grid(["mm-opt"])
        >>> all(r.passed for r in results)
    """

    def __init__(
        self,
        ring: Optional[Ring] = None,
        config: KernelConfig = DEFAULT_CONFIG,
        cost: Optional[CostModel] = None,
        seed: int = 42,
    ):
        self.ring = ring or ModularRing()
        self.config = config
        self.cost = cost or CostModel()
        self.seed = seed

    # --- grid -------------------------------------------------------------------

    def grid(
        self, kernels: Optional[list[str]] = None, quick: bool = False
    ) -> Iterator[tuple[str, dict[str, Any]]]:
        """Parameter cells of the default suite, in a fixed order."""
        selected = [normalize_kernel(k) for k in kernels] if kernels else list(SUITES)
        for kernel in selected:
            if kernel not in SUITES:
                raise UnknownAlgorithmError(
                    f"No verification suite for {kernel!r}", ", ".join(SUITES)
                )
        sides = (2, 4, 8) if quick else (2, 4, 8, 16, 32)
        for kernel in selected:
            yield from self._cells(kernel, sides, quick)

    def _cells(
        self, kernel: str, sides: tuple[int, ...], quick: bool
    ) -> Iterator[tuple[str, dict[str, Any]]]:
        if kernel in ("mm", "mm-nd", "mm-ns"):
            for n in sides:
                yield kernel, {"n": n}
        elif kernel in ("mm-hd", "mm-opt"):
            for n in sides:
                for r in _powers(n):
                    yield kernel, {"n": n, "r": r}
        elif kernel == "mm-tradeoff":
            for n in sides:
                for p in sorted({1, n * n, 2 * n * n, 3 * n * n, n**3}):
                    yield kernel, {"n": n, "p": p}
        elif kernel in ("rmm", "rmm-opt"):
            extents = (1, 4, 16) if quick else (1, 2, 8, 32)
            for a in extents:
                for b in extents:
                    for c in extents:
                        plane_counts = _powers(b) if kernel == "rmm-opt" else [1]
                        for r in plane_counts:
                            yield kernel, {"a": a, "b": b, "c": c, "r": r}
        elif kernel in TC_KERNELS:
            layouts: list[tuple[tuple[int, int, int], Optional[str], Optional[str]]] = [
                (groups, None, None) for groups in TC_GROUPS
            ]
            layouts += list(TC_LAYOUTS)
            for (u, v, x), u_axes, v_axes in layouts:
                for n in (2,) if quick else (2, 4):
                    base: dict[str, Any] = {"n": n, "u": u, "v": v, "x": x}
                    if u_axes:
                        base.update(u_axes=u_axes, v_axes=v_axes)
                    for r in self._tc_planes(kernel, n, x):
                        yield kernel, {**base, "r": r}
        elif kernel == "tt":
            for d in (1, 2, 3, 4):
                for n in (1, 2, 4):
                    yield kernel, {"n": n, "d": d}
        else:
            for s1, s2 in ((0, 1), (1, 1), (2, 1), (1, 3), (2, 2)):
                for n in (1, 2, 4):
                    for order in FlatteningOrder:
                        yield kernel, {"n": n, "s1": s1, "s2": s2, "order": order.value}

    @staticmethod
    def _tc_planes(kernel: str, n: int, x: int) -> list[int]:
        if kernel == "tc":
            return [1]
        if kernel == "tc-hs":
            return [r for r in _powers(n**x) if valid_tc_planes(r, n, x)]
        return _powers(n**x)

    # --- cells ------------------------------------------------------------------

    def run_grid(
        self, kernels: Optional[list[str]] = None, quick: bool = False
    ) -> list[CellResult]:
        """Run every cell of the suite for the selected kernels."""
        results = [self.run_cell(kernel, params) for kernel, params in self.grid(kernels, quick)]
        failed = sum(1 for r in results if not r.passed)
        logger.info("Verification: %d cells, %d failed", len(results), failed)
        return results

    def run_cell(self, kernel: str, params: Mapping[str, Any]) -> CellResult:
        """Build, race-check, run and compare one kernel instance."""
        kernel = normalize_kernel(kernel)
        rng = np.random.default_rng(_seed_for(self.seed, kernel, params))
        workload = build_workload(kernel, params, self.ring, rng, self.config)
        used = workload.params
        report = check_race_freedom(workload.tree)
        if not report.ok:
            logger.info("%s %s: race", kernel, used)
            return CellResult(kernel, used, correct=False, race=report.describe(), detail="not run")
        expected = reference_result(workload)
        run = run_instrumented(workload.tree, self.cost)
        correct = self.ring.equal(workload.output.to_numpy(), expected)
        work_ok = workload.mult_adds is None or run.metrics.mult_adds == workload.mult_adds
        detail = "" if correct else "result differs from the reference loop"
        if not work_ok:
            detail = f"mult_adds {run.metrics.mult_adds} != {workload.mult_adds}"
        logger.info("%s %s: %s", kernel, used, "pass" if correct and work_ok else "FAIL")
        return CellResult(kernel, used, correct, work_ok=work_ok, detail=detail)


def reference_result(workload: Workload) -> NDArray:
    """Expected output of a workload, computed by the serial reference loops."""
    kernel = workload.kernel
    ring = workload.output.ring
    if kernel in MM_KERNELS:
        u, v = workload.inputs
        assert isinstance(u, Matrix) and isinstance(v, Matrix)
        expected = Matrix.create(u.rows, u.rows, ring)
        mm_loop(expected, u, v)
        return expected.to_numpy()
    if kernel in RMM_KERNELS:
        u, v = workload.inputs
        out = ring.zeros((u.shape[0], v.shape[1]))
        us, vs = u.to_numpy(), v.to_numpy()
        for i, j in np.ndindex(out.shape):
            acc = 0
            for k in range(us.shape[1]):
                acc = ring.fma(acc, us[i, k], vs[k, j])
            out[i, j] = acc
        return out
    if kernel in TC_KERNELS:
        u, v = workload.inputs
        assert isinstance(u, Tensor) and isinstance(v, Tensor) and workload.spec is not None
        expected_t = Tensor.create(workload.spec.u + workload.spec.v, u.side, ring)
        tc_loop(expected_t, u, v, workload.spec)
        return expected_t.to_numpy()
    if kernel == "tt":
        (source,) = workload.inputs
        ranks = RankVector.parse(str(workload.params["ranks"]))
        return np.transpose(source.to_numpy(), ranks.numpy_axes())
    if kernel == "tf-td":
        return workload.inputs[0].to_numpy()
    if kernel == "reduce":
        total = ring.zeros(workload.output.shape)
        for plane in workload.inputs:
            ring.add_into(total, plane.to_numpy())
        return total
    raise UnknownAlgorithmError(f"No reference for {kernel!r}")


def summarize(results: list[CellResult]) -> tuple[int, int]:
    """(passed, failed) counts."""
    passed = sum(1 for r in results if r.passed)
    return passed, len(results) - passed
