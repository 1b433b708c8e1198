"""Weighted stage progress for flow runs and verification suites.

A ``ProgressMonitor`` is built from ``(stage name, weight)`` pairs. Each
``stage_start(name, total)`` returns a ``RunStage`` context manager whose
``advance()`` calls are turned into keyword events for
``progress_change_callback``:

* ``stage_summary`` once, with the normalised stage weights;
* ``progress_start`` when a stage starts;
* ``progress_update`` while it advances, throttled to ``report_interval``;
* ``progress_end`` when its context exits.

Every event except the summary carries ``stage``, ``stage_progress``,
``stage_current``, ``stage_total`` and ``overall_progress`` (percent).
"""

import logging
import threading
import time
from collections.abc import Callable

logger = logging.getLogger(__name__)


class ProgressMonitor:
    def __init__(
        self,
        stages: list[tuple[str, float]],
        progress_change_callback: Callable | None = None,
        report_interval: float = 0.1,
        disable: bool = False,
    ):
        self.lock = threading.Lock()
        total_weight = sum(weight for _, weight in stages)
        self.stage = {
            name: RunStage(name, weight / total_weight, self) for name, weight in stages
        }
        self.callback = progress_change_callback
        self.report_interval = report_interval
        self.disable = disable
        self.last_report_time = 0.0
        if self.callback and not disable:
            self.callback(
                type="stage_summary",
                stages=[{"name": s.name, "percent": s.weight} for s in self.stage.values()],
            )

    def stage_start(self, stage_name: str, total: int):
        if self.disable:
            return DummyRunStage(stage_name, total)
        stage = self.stage[stage_name]
        stage.run_time += 1
        stage.current = 0
        stage.total = total
        self.last_report_time = 0.0
        self._emit("progress_start", stage, self.calculate_current_progress())
        return stage

    def stage_update(self, stage: "RunStage"):
        now = time.time()
        if stage.total > 3 and now - self.last_report_time < self.report_interval:
            return
        self.last_report_time = now
        self._emit("progress_update", stage, self.calculate_current_progress(stage))

    def stage_done(self, stage: "RunStage"):
        self.last_report_time = 0.0
        logger.debug(f"Stage {stage.name} done ({stage.total} items)")
        self._emit("progress_end", stage, self.calculate_current_progress())

    def calculate_current_progress(self, stage: "RunStage | None" = None) -> float:
        """Overall percent: finished stages in full, ``stage`` pro rata."""
        finished = [s for s in self.stage.values() if s.finished]
        if len(finished) == len(self.stage):
            return 100
        progress = sum(s.weight * 100 for s in finished)
        if stage is not None and not stage.finished and stage.total > 0:
            progress += stage.weight * 100 * stage.current / stage.total
        return progress

    def _emit(self, event_type: str, stage: "RunStage", overall: float):
        if not self.callback:
            return
        self.callback(
            type=event_type,
            stage=stage.name,
            stage_progress=100.0 * stage.current / stage.total if stage.total else 100.0,
            stage_current=stage.current,
            stage_total=stage.total,
            overall_progress=overall,
        )


class RunStage:
    def __init__(self, name: str, weight: float, pm: ProgressMonitor):
        self.name = name
        self.weight = weight
        self.pm = pm
        self.current = 0
        self.total = 0
        self.run_time = 0

    @property
    def finished(self) -> bool:
        return self.run_time > 0 and self.current >= self.total

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        with self.pm.lock:
            if self.current < self.total:
                # stop criteria end the flow stage before max_steps
                logger.debug(f"Stage {self.name} ended at {self.current}/{self.total}")
            self.current = self.total
            self.pm.stage_done(self)

    def advance(self, n: int = 1):
        with self.pm.lock:
            self.current += n
            self.pm.stage_update(self)


class DummyRunStage:
    """Stage handed out by a disabled monitor; counts but reports nothing."""

    def __init__(self, name: str, total: int):
        self.name = name
        self.total = total
        self.current = 0

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        pass

    def advance(self, n: int = 1):
        self.current += n
