from typing import TypedDict


class RunState(TypedDict):
    """
    Carried through one CLI pipeline. `artifacts`, `checks` and `events` are
    echoed to manifest.json; `timings` goes to timings.json only.
    """
    config: dict
    run_dir: str  # where artifacts and manifest.json go
    artifacts: list[dict]  # ArtifactRecord payloads
    checks: list[dict]  # CheckResult payloads
    events: list[dict]  # RunEvent payloads
    errors: list[str]
    timings: dict[str, float]  # stage -> seconds


def new_run_state(config: dict, run_dir: str) -> RunState:
    return RunState(config=config, run_dir=run_dir, artifacts=[], checks=[], events=[], errors=[], timings={})
