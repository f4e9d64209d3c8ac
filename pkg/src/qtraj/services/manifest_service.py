import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from qtraj.dao.artifact_store import write_json
from qtraj.models.artifact import ArtifactRecord, RunEvent
from qtraj.models.report import PhysicsReport
from qtraj.states.run_state import RunState

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"


def record_event(
        state: RunState,
        event_type: str,
        entity: str | None = None,
        detail: dict | None = None,
) -> RunEvent:
    """
    Central run log. Call this instead of appending to state["events"] directly.

    Usage:
        record_event(state, "BASIS_SOLVED", "basis", detail={"modes": 41})
    """
    event = RunEvent(event_type=event_type, entity=entity, detail=detail or {})
    state["events"].append(event.model_dump(mode="json"))
    logger.info("RUN [%s] entity=%s", event_type, entity)
    return event


def record_artifact(state: RunState, record: ArtifactRecord) -> ArtifactRecord:
    state["artifacts"].append(record.model_dump(mode="json"))
    record_event(state, "ARTIFACT_WRITTEN", record.name, detail={"sha256": record.sha256})
    return record


def record_report(state: RunState, report: PhysicsReport) -> PhysicsReport:
    for check in report.checks:
        state["checks"].append(check.model_dump(mode="json"))
        if not check.passed:
            logger.warning("[Checks] %s failed: residual %.3e > %.3e", check.name, check.residual, check.tolerance)
    return report


@contextmanager
def stage(state: RunState, name: str) -> Iterator[None]:
    """Wall-clock timing of one pipeline stage."""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        state["timings"][name] = state["timings"].get(name, 0.0) + elapsed
        logger.info("[Timing] %s took %.3fs", name, elapsed)


def write_manifest(state: RunState) -> Path:
    """manifest.json (config, artifacts, checks, events) and timings.json side by side in the run directory."""
    run_dir = Path(state["run_dir"])
    payload = {
        "config": state["config"],
        "artifacts": state["artifacts"],
        "checks": state["checks"],
        "events": state["events"],
        "errors": state["errors"],
        "passed": all(check["passed"] for check in state["checks"]),
    }
    write_json(run_dir, MANIFEST_NAME, payload)
    write_json(run_dir, TIMINGS_NAME, {name: round(seconds, 6) for name, seconds in state["timings"].items()})
    return run_dir / MANIFEST_NAME
