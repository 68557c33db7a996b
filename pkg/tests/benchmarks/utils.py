from __future__ import annotations

import time
import typing as t

import numpy as np
from rich.console import Console
from rich.table import Table

R = t.TypeVar("R")
Timing = t.Tuple[float, float, float]


def timeit(func: t.Callable[..., R], iteration: int = 3) -> t.Callable[..., Timing]:
    def function_timer(*args: t.Any, **kwargs: t.Any) -> Timing:
        """
        Time `func` over `iteration` runs after one warmup; returns the mean,
        the variance and the best run in seconds
        """
        func(*args, **kwargs)

        runtimes = []
        for _ in range(iteration):
            start = time.perf_counter()
            # we dont care about the return value
            func(*args, **kwargs)
            runtimes.append(time.perf_counter() - start)

        return float(np.mean(runtimes)), float(np.var(runtimes)), float(np.min(runtimes))

    return function_timer


def print_table(result: t.Mapping[str, Timing]) -> None:
    table = Table("Benchmark", "mean (s)", "var", "best (s)", title="Benchmark Results")

    for name, (mean, var, best) in result.items():
        table.add_row(name, f"{mean:.4f}", f"{var:.2e}", f"{best:.4f}")

    console = Console()
    console.print(table)
