from logging import LogRecord, StreamHandler
from typing import Optional


class RunContextStreamHandler(StreamHandler):
    """Stream handler stamping every line with the running subcommand and master seed."""

    def __init__(self, stream=None, command: str = "", seed: Optional[int] = None):
        super().__init__(stream)
        self._command = command
        self._seed = seed

    def set_seed(self, seed: int):
        self._seed = seed

    def format(self, record: LogRecord) -> str:
        result = super().format(record)
        prefix = self._command or "linglam"
        if self._seed is not None:
            prefix = f"{prefix} seed={self._seed}"
        return f"[{prefix}] {result}"
