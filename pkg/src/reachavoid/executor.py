from __future__ import annotations

import asyncio
import functools
import logging
import threading
import typing as t
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from tqdm.auto import tqdm

from reachavoid.exceptions import ExceptionInRunner

logger = logging.getLogger(__name__)


@dataclass
class TrialFailure:
    """
    Stand-in result of a job that raised; the batch keeps going.
    """

    name: str
    error: str
    error_type: str

    @classmethod
    def of(cls, name: str, exc: BaseException) -> TrialFailure:
        return cls(name=name, error=str(exc), error_type=type(exc).__name__)


Job = t.Tuple[t.Callable[[], t.Any], str]


class Runner(threading.Thread):
    def __init__(
        self,
        jobs: t.List[Job],
        desc: str,
        keep_progress_bar: bool = True,
        raise_exceptions: bool = True,
        max_workers: int = 1,
        timeout: t.Optional[float] = None,
    ):
        super().__init__()
        self.jobs = jobs
        self.desc = desc
        self.keep_progress_bar = keep_progress_bar
        self.raise_exceptions = raise_exceptions
        self.max_workers = max_workers
        self.timeout = timeout
        self.results: t.Optional[t.List[t.Tuple[int, t.Any]]] = None
        self.loop = asyncio.new_event_loop()

    async def _job(
        self, index: int, job: Job, pool: t.Optional[ProcessPoolExecutor]
    ) -> t.Tuple[int, t.Any]:
        fn, name = job
        try:
            if pool is None:
                # single worker: run in this thread, one job after the other
                await asyncio.sleep(0)
                return index, fn()
            future = self.loop.run_in_executor(pool, fn)
            return index, await asyncio.wait_for(future, timeout=self.timeout)
        except Exception as e:
            if self.raise_exceptions:
                raise
            logger.error("job %s in Executor raised an exception", name, exc_info=True)
            return index, TrialFailure.of(name, e)

    async def _aresults(self, pool: t.Optional[ProcessPoolExecutor]) -> t.List[t.Tuple[int, t.Any]]:
        tasks = [
            self.loop.create_task(self._job(i, job, pool), name=job[1])
            for i, job in enumerate(self.jobs)
        ]
        results = []
        try:
            for future in tqdm(
                asyncio.as_completed(tasks),
                desc=self.desc,
                total=len(tasks),
                # whether you want to keep the progress bar after completion
                leave=self.keep_progress_bar,
            ):
                results.append(await future)
        finally:
            for task in tasks:
                task.cancel()
        return results

    def run(self):
        pool = ProcessPoolExecutor(max_workers=self.max_workers) if self.max_workers > 1 else None
        try:
            self.results = self.loop.run_until_complete(self._aresults(pool))
        except Exception:
            logger.error("Runner in Executor stopped", exc_info=True)
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
            self.loop.close()


@dataclass
class Executor:
    """
    Runs submitted callables on a bounded worker pool and returns their results in
    submission order.

    With more than one worker the callables and their arguments go to worker
    processes and must be picklable.
    """

    desc: str = "Running trials"
    keep_progress_bar: bool = True
    jobs: t.List[Job] = field(default_factory=list, repr=False)
    raise_exceptions: bool = False
    max_workers: int = 1
    timeout: t.Optional[float] = None

    def submit(self, callable: t.Callable, *args, name: t.Optional[str] = None, **kwargs):
        name = name or f"job-{len(self.jobs)}"
        self.jobs.append((functools.partial(callable, *args, **kwargs), name))

    def results(self) -> t.List[t.Any]:
        executor_job = Runner(
            jobs=self.jobs,
            desc=self.desc,
            keep_progress_bar=self.keep_progress_bar,
            raise_exceptions=self.raise_exceptions,
            max_workers=self.max_workers,
            timeout=self.timeout,
        )
        executor_job.start()
        executor_job.join()

        if executor_job.results is None:
            if self.raise_exceptions:
                raise ExceptionInRunner()
            logger.error("Executor failed to complete. Please check logs above.")
            return []
        sorted_results = sorted(executor_job.results, key=lambda x: x[0])
        return [r[1] for r in sorted_results]
