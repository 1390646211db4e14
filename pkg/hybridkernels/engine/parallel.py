"""Multi-threaded executor honouring the same fork-join DAG.

Each parallel node splits its thread budget among its children. A child
that receives a budget of one runs its whole subtree on the calling thread,
so nested forks never wait on an exhausted pool.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor

from hybridkernels.domain.errors import RaceConditionError
from hybridkernels.engine.races import check_race_freedom
from hybridkernels.engine.tasks import TaskKind, TaskNode

logger = logging.getLogger(__name__)


class _BudgetedRunner:
    def run(self, node: TaskNode, budget: int) -> None:
        kind = node.kind
        if kind is TaskKind.LEAF:
            assert node.action is not None
            node.action.execute()
        elif kind is TaskKind.ALLOC:
            assert node.buffer is not None
            node.buffer.allocate()
        elif kind is TaskKind.FREE:
            assert node.buffer is not None
            node.buffer.release()
        elif kind is TaskKind.SEQUENCE or budget <= 1 or len(node.children) < 2:
            for child in node.children:
                self.run(child, budget)
        else:
            self._run_parallel(node, budget)

    def _run_parallel(self, node: TaskNode, budget: int) -> None:
        k = len(node.children)
        workers = min(k, budget)
        shares = [budget // k + (1 if i < budget % k else 0) for i in range(k)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(self.run, child, max(share, 1))
                for child, share in zip(node.children, shares, strict=True)
            ]
            for future in futures:
                future.result()


def run_parallel(root: TaskNode, threads: int = 1, *, check_races: bool = True) -> float:
    """Execute a task tree on up to ``threads`` threads.

    Args:
        root: Task tree to run
        threads: Thread budget
        check_races: Refuse trees that fail the disjoint-write check

    Returns:
        Wall time in seconds (0.0 for a tree without leaves)

    Raises:
        RaceConditionError: If check_races is set and a violation is found
    """
    if threads < 1:
        raise ValueError(f"threads must be positive, got {threads}")
    if next(root.leaves(), None) is None:
        return 0.0
    if check_races:
        report = check_race_freedom(root)
        if not report.ok:
            raise RaceConditionError("Refusing to run a racy task tree", report.describe())
    start = time.perf_counter()
    _BudgetedRunner().run(root, threads)
    elapsed = time.perf_counter() - start
    logger.debug("%s on %d threads: %.6fs", root.label or root.kind.value, threads, elapsed)
    return elapsed
