"""
Batches of randomized games.

Trial k plays every (defense, attack) policy pair of the bench on one scenario
drawn from the seed derived from (bench seed, k), so policies are always
compared on identical initial joint states.
"""
from __future__ import annotations

import io
import json
import logging
import typing as t
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from reachavoid.bench.scenarios import BenchSpec, generate_random_scenario
from reachavoid.coordination import single_attack_value
from reachavoid.engine import (
    DefensePolicy,
    GameOutcome,
    GameTrace,
    ScenarioConfig,
    run_game,
    write_trace_csv,
    write_trace_summary,
)
from reachavoid.exceptions import ConfigurationError, ConsistencyError, ExceptionInRunner
from reachavoid.executor import Executor, TrialFailure
from reachavoid.run_config import RunConfig, SolverConfig, add_retry
from reachavoid.solver import CheckCounter
from reachavoid.utils import stable_seed

logger = logging.getLogger(__name__)

# resampling budget for scenarios whose initial value must fall in a window
MAX_WINDOW_ATTEMPTS = 500


class TrialRecord(BaseModel):
    trial: int
    seed: int
    defense_policy: str
    attack_policy: str
    n_defenders: int
    n_attackers: int
    initial_phi: t.Optional[float] = None
    payoff: int
    captures: int
    timeouts: int
    outcome: str
    termination_reason: str
    steps: int
    average_check_number: float
    guaranteed_bound: t.Optional[int] = None
    bound_slack: t.Optional[int] = None
    check_bound_holds: t.Optional[bool] = None
    monotone: bool
    conservation: bool

    @classmethod
    def from_trace(cls, trial: int, config: ScenarioConfig, trace: GameTrace, initial_phi: t.Optional[float]) -> TrialRecord:
        return cls(
            trial=trial,
            seed=config.rng_seed,
            defense_policy=trace.defense_policy.value,
            attack_policy=trace.attack_policy.value,
            n_defenders=config.n_defenders,
            n_attackers=config.n_attackers,
            initial_phi=_rounded(initial_phi),
            payoff=trace.payoff,
            captures=trace.n_captured,
            timeouts=trace.n_timed_out,
            outcome=trace.outcome.value,
            termination_reason=trace.termination_reason.value if trace.termination_reason else "",
            steps=trace.steps,
            average_check_number=round(trace.average_check_number, 6),
            guaranteed_bound=trace.guaranteed_bound,
            bound_slack=trace.bound_slack,
            check_bound_holds=trace.check_bound_holds(),
            monotone=trace.monotone_gamma(),
            conservation=trace.conservation_holds(),
        )


class TrialError(BaseModel):
    trial: int
    error_type: str
    error: str


class OutcomeTally(BaseModel):
    """
    Aggregate of one (defense, attack) policy pair over the batch.

    Every trial lands in exactly one outcome category or among the failures.
    """

    defense_policy: str
    attack_policy: str
    trials: int
    counts: t.Dict[str, int]
    failures: int = 0
    capture_numbers: t.List[int] = []
    check_numbers: t.List[float] = []
    bound_slacks: t.List[int] = []
    check_bound_violations: int = 0

    @property
    def conserved(self) -> bool:
        return sum(self.counts.values()) + self.failures == self.trials

    @property
    def mean_captures(self) -> float:
        return float(np.mean(self.capture_numbers)) if self.capture_numbers else 0.0

    @property
    def mean_check_number(self) -> float:
        return float(np.mean(self.check_numbers)) if self.check_numbers else 0.0


class PairedComparison(BaseModel):
    "capture numbers of reallocating and initial-only defense on the same scenarios"

    attack_policy: str
    trials: t.List[int] = []
    mdea: t.List[int] = []
    initial: t.List[int] = []

    @property
    def at_least(self) -> int:
        return sum(m >= i for m, i in zip(self.mdea, self.initial))

    @property
    def strictly_better(self) -> int:
        return sum(m > i for m, i in zip(self.mdea, self.initial))


class BenchSummary(BaseModel):
    template: str
    dimension: int
    trials: int
    seed: int
    tallies: t.List[OutcomeTally]
    paired: t.List[PairedComparison] = []
    errors: t.List[TrialError] = []

    def tally(self, defense_policy: str, attack_policy: str) -> OutcomeTally:
        for tally in self.tallies:
            if (tally.defense_policy, tally.attack_policy) == (defense_policy, attack_policy):
                return tally
        raise KeyError((defense_policy, attack_policy))


def _rounded(value: t.Optional[float]) -> t.Optional[float]:
    if value is None:
        return None
    if not np.isfinite(value):
        return float(value)
    return round(float(value), 9)


def initial_phi(config: ScenarioConfig, solver_config: t.Optional[SolverConfig] = None) -> float:
    "smallest single-attack value of the whole defender team over the attackers at t = 0"
    team = config.initial_state().team_state(config)
    counter = CheckCounter()
    values = [
        single_attack_value(team.view(team.defender_ids, j), config.domain, config.target, counter, solver_config)[0]
        for j in team.active_attackers
    ]
    return min(values, default=float("inf"))


def draw_trial_scenario(
    spec: BenchSpec, trial: int, solver_config: t.Optional[SolverConfig] = None
) -> t.Tuple[ScenarioConfig, t.Optional[float]]:
    """
    Scenario of one trial, resampled until its initial value lies in the bench's
    window when one is set.
    """
    windowed = spec.initial_phi_min is not None or spec.initial_phi_max is not None
    for attempt in range(MAX_WINDOW_ATTEMPTS):
        parts = (spec.seed, trial) if attempt == 0 else (spec.seed, trial, attempt)
        config = generate_random_scenario(spec.template, stable_seed(*parts))
        if not windowed:
            return config, None
        phi = initial_phi(config, solver_config)
        if spec.initial_phi_min is not None and not phi >= spec.initial_phi_min:
            continue
        if spec.initial_phi_max is not None and not phi <= spec.initial_phi_max:
            continue
        return config, phi
    raise ConfigurationError(
        f"trial {trial}: no scenario with initial value in [{spec.initial_phi_min}, "
        f"{spec.initial_phi_max}] after {MAX_WINDOW_ATTEMPTS} draws",
        "initial_phi_min",
    )


def run_trial(
    spec: BenchSpec,
    trial: int,
    solver_config: t.Optional[SolverConfig] = None,
    run_config: t.Optional[RunConfig] = None,
) -> t.List[TrialRecord]:
    """
    Play every policy pair of `spec` on the scenario of `trial` and write its
    artifacts.
    """
    run_config = run_config or RunConfig()
    config, phi0 = draw_trial_scenario(spec, trial, solver_config)
    out = Path(spec.out_dir) / "trials"
    records = []
    for defense in spec.defense_policies:
        for attack in spec.attack_policies:
            trace = run_game(config, defense, attack, solver_config, record_snapshots=spec.record_traces)
            records.append(TrialRecord.from_trace(trial, config, trace, phi0))
            stem = f"{trial:04d}-{defense}-{attack}"
            add_retry(write_trace_summary, run_config)(trace, out / f"{stem}.json")
            if spec.record_traces:
                add_retry(write_trace_csv, run_config)(trace, out / f"{stem}.csv")
            if spec.emit_plots and config.dimension == 2:
                from reachavoid.bench.plotting import emit_trajectory_plot

                emit_trajectory_plot(trace, config, out / f"{stem}.svg")
    if spec.emit_plots:
        from reachavoid.bench.plotting import emit_srs_plot, write_srs_point_cloud

        if config.dimension == 2:
            emit_srs_plot(config, 1, None, out / f"{trial:04d}-srs.svg", solver_config)
        else:
            write_srs_point_cloud(config, 1, None, out / f"{trial:04d}-srs.csv")
    return records


def aggregate(spec: BenchSpec, per_trial: t.Sequence[t.Union[t.List[TrialRecord], TrialFailure]]) -> BenchSummary:
    records: t.List[TrialRecord] = []
    errors: t.List[TrialError] = []
    for k, result in enumerate(per_trial):
        if isinstance(result, TrialFailure):
            errors.append(TrialError(trial=k, error_type=result.error_type, error=result.error))
        else:
            records.extend(result)

    tallies = []
    for defense in spec.defense_policies:
        for attack in spec.attack_policies:
            rows = [r for r in records if (r.defense_policy, r.attack_policy) == (defense, attack)]
            counts = {o.value: 0 for o in GameOutcome}
            for r in rows:
                counts[r.outcome] += 1
            tallies.append(
                OutcomeTally(
                    defense_policy=defense,
                    attack_policy=attack,
                    trials=spec.trials,
                    counts=counts,
                    failures=len(errors),
                    capture_numbers=[r.captures for r in rows],
                    check_numbers=[r.average_check_number for r in rows],
                    bound_slacks=[r.bound_slack for r in rows if r.bound_slack is not None],
                    check_bound_violations=sum(r.check_bound_holds is False for r in rows),
                )
            )

    paired = []
    if {DefensePolicy.MDEA.value, DefensePolicy.INITIAL_ONLY.value} <= set(spec.defense_policies):
        for attack in spec.attack_policies:
            by_trial: t.Dict[int, t.Dict[str, int]] = {}
            for r in records:
                if r.attack_policy == attack:
                    by_trial.setdefault(r.trial, {})[r.defense_policy] = r.captures
            trials = sorted(by_trial)
            paired.append(
                PairedComparison(
                    attack_policy=attack,
                    trials=trials,
                    mdea=[by_trial[k][DefensePolicy.MDEA.value] for k in trials],
                    initial=[by_trial[k][DefensePolicy.INITIAL_ONLY.value] for k in trials],
                )
            )

    return BenchSummary(
        template=spec.template.name,
        dimension=spec.template.dimension,
        trials=spec.trials,
        seed=spec.seed,
        tallies=tallies,
        paired=paired,
        errors=errors,
    )


def summary_tables(summary: BenchSummary) -> t.List[Table]:
    outcomes = Table(
        "Policies",
        "Trials",
        "Capture",
        "Timeout",
        "Fail",
        "Errors",
        "Mean captures",
        "Mean check number",
        "Min bound slack",
        "Check bound violations",
        title=f"{summary.template}: {summary.trials} trials, seed {summary.seed}",
    )
    for tally in summary.tallies:
        outcomes.add_row(
            f"{tally.defense_policy} / {tally.attack_policy}",
            str(tally.trials),
            str(tally.counts[GameOutcome.DEFENSE_SUCCESS_CAPTURE.value]),
            str(tally.counts[GameOutcome.DEFENSE_SUCCESS_TIMEOUT.value]),
            str(tally.counts[GameOutcome.DEFENSE_FAIL.value]),
            str(tally.failures),
            f"{tally.mean_captures:.3f}",
            f"{tally.mean_check_number:.3f}",
            str(min(tally.bound_slacks)) if tally.bound_slacks else "-",
            str(tally.check_bound_violations),
        )
    tables = [outcomes]
    for comparison in summary.paired:
        paired = Table(
            "Trial", "mdea", "initial", title=f"Paired capture numbers ({comparison.attack_policy} attackers)"
        )
        for k, m, i in zip(comparison.trials, comparison.mdea, comparison.initial):
            paired.add_row(str(k), str(m), str(i))
        paired.add_row(
            "mdea >= initial",
            f"{comparison.at_least}/{len(comparison.trials)}",
            f"strictly: {comparison.strictly_better}",
        )
        tables.append(paired)
    return tables


def render_summary(summary: BenchSummary, width: int = 120) -> str:
    console = Console(file=io.StringIO(), width=width, color_system=None)
    for table in summary_tables(summary):
        console.print(table)
    return console.file.getvalue()  # type: ignore[attr-defined]


def write_outputs(summary: BenchSummary, per_trial: t.Sequence[t.Any], out_dir: Path, run_config: RunConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [r.model_dump() for result in per_trial if isinstance(result, list) for r in result]
    frame = pd.DataFrame(rows, columns=list(TrialRecord.model_fields))
    add_retry(frame.to_csv, run_config)(out_dir / "trials.csv", index=False, float_format="%.9f")
    text = json.dumps(summary.model_dump(), sort_keys=True, indent=2) + "\n"
    add_retry((out_dir / "summary.json").write_text, run_config)(text)
    add_retry((out_dir / "summary.txt").write_text, run_config)(render_summary(summary))


def run_bench(
    spec: BenchSpec,
    run_config: t.Optional[RunConfig] = None,
    solver_config: t.Optional[SolverConfig] = None,
    show_progress: bool = True,
) -> BenchSummary:
    """
    Run every trial of `spec` on the worker pool, then aggregate and write
    `trials.csv`, `summary.json` and `summary.txt` to the bench's output directory.

    A trial that raises is recorded as an error and the batch continues.

    Raises
    ------
    ExceptionInRunner
        When the worker pool itself breaks down.
    """
    spec.validate()
    run_config = run_config or RunConfig()
    executor = Executor(
        desc=f"Running {spec.template.name}",
        keep_progress_bar=show_progress,
        raise_exceptions=False,
        max_workers=run_config.max_workers,
        timeout=run_config.timeout,
    )
    for k in range(spec.trials):
        executor.submit(run_trial, spec, k, solver_config, run_config, name=f"trial-{k}")
    per_trial = executor.results()
    if len(per_trial) != spec.trials:
        raise ExceptionInRunner()

    summary = aggregate(spec, per_trial)
    for tally in summary.tallies:
        if not tally.conserved:
            raise ConsistencyError(
                f"{tally.defense_policy}/{tally.attack_policy}: outcome counts do not add up to the trial count"
            )
    write_outputs(summary, per_trial, Path(spec.out_dir), run_config)
    logger.info("bench %s: %d trials, %d errors", spec.template.name, spec.trials, len(summary.errors))
    return summary
