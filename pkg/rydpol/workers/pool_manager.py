# rydpol/workers/pool_manager.py
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from rydpol.config.engine_config import engine_settings

logger = logging.getLogger("rydpol.workers")

T = TypeVar("T")
R = TypeVar("R")


class PoolManager:
    """Runs independent work items on a process pool and returns results in submission order."""

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers if workers and workers > 0 else engine_settings.resolved_workers()
        self.last_run_stats = {}

    def map_ordered(self, fn: Callable[[T], R], tasks: Sequence[T], label: str = "tasks") -> List[R]:
        """
        Apply fn to each task. Results come back indexed like the input,
        independent of completion order.
        """
        started = time.time()
        workers = min(self.workers, len(tasks)) if tasks else 1
        logger.info(f"🚀 Running {len(tasks)} {label} on {workers} worker(s)")

        if workers <= 1:
            results = [fn(task) for task in tasks]
        else:
            results: List[Optional[R]] = [None] * len(tasks)
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = {executor.submit(fn, task): index for index, task in enumerate(tasks)}
                try:
                    for future, index in futures.items():
                        results[index] = future.result()
                except Exception as e:
                    logger.error(f"❌ Worker failed on {label}: {str(e)}")
                    for future in futures:
                        future.cancel()
                    raise

        elapsed = time.time() - started
        self.last_run_stats = {
            "tasks": len(tasks),
            "workers": workers,
            "duration_seconds": elapsed,
            "duration_formatted": f"{int(elapsed // 3600)}h {int((elapsed % 3600) // 60)}m {elapsed % 60:.1f}s",
        }
        logger.info(f"✅ Finished {len(tasks)} {label} in {elapsed:.2f} s")
        return results
