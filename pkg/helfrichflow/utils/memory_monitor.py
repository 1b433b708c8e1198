import logging
import threading

import psutil

logger = logging.getLogger(__name__)

MB = 1024 * 1024


class MemoryMonitor:
    """Peak resident memory of this process while ``label`` runs.

    Dense Hessian assembly and the per-mode LU factors of the preconditioner
    dominate memory; the peak is logged when the context exits.
    """

    def __init__(self, label: str = "command", interval: float = 0.1):
        self.label = label
        self.interval = interval
        self.peak_mb = 0.0
        self._process = psutil.Process()
        self._stop = threading.Event()
        self._thread = None

    def __enter__(self):
        self._stop.clear()
        self._thread = threading.Thread(target=self._poll, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self.sample()
        logger.info(f"Peak memory of {self.label}: {self.peak_mb:.1f} MB")

    def sample(self) -> float:
        try:
            rss = self._process.memory_info().rss
        except (psutil.NoSuchProcess, psutil.AccessDenied):
            return self.peak_mb
        self.peak_mb = max(self.peak_mb, rss / MB)
        return self.peak_mb

    def _poll(self):
        while not self._stop.wait(self.interval):
            self.sample()
