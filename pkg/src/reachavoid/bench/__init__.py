from reachavoid.bench.runner import (
    BenchSummary,
    OutcomeTally,
    PairedComparison,
    TrialRecord,
    run_bench,
)
from reachavoid.bench.scenarios import (
    PRESETS,
    BenchSpec,
    ScenarioTemplate,
    generate_random_scenario,
    get_preset,
)

__all__ = [
    "BenchSpec",
    "BenchSummary",
    "OutcomeTally",
    "PRESETS",
    "PairedComparison",
    "ScenarioTemplate",
    "TrialRecord",
    "generate_random_scenario",
    "get_preset",
    "run_bench",
]
