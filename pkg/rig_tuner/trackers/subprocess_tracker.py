from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
from collections import deque
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from rig_tuner.rigs import ControlVector
from rig_tuner.utils.errors import TrackerError

from .tracker import Tracker, TrackerCapabilities

_EXCERPT_LENGTH = 200


def _excerpt(line: str) -> str:
    line = line.rstrip("\n")
    if len(line) <= _EXCERPT_LENGTH:
        return line
    return line[:_EXCERPT_LENGTH] + "..."


class SubprocessTracker(Tracker):
    """
    External black-box tracker spoken to over stdin / stdout.

    Each request is one JSON line {"theta_T": [...], "v": [...]} and each
    response one JSON line {"c": [...]}. The process is started on first use
    and exchanges are serialized.

    Closed trackers may contain threshold conditions (lip sealing, blink
    snapping) that make their output discontinuous in theta_T. Finite
    differences across such thresholds are meaningless; nothing here detects
    them.
    """

    def __init__(
        self,
        command: str | Sequence[str],
        n_controls: int,
        timeout: float = 30.0,
        transcript_length: int = 10,
    ):
        self._command = shlex.split(command) if isinstance(command, str) else list(command)
        self._n_controls = n_controls
        self._timeout = timeout
        self._transcript: deque[str] = deque(maxlen=transcript_length)
        self._process: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()

    @property
    def n_controls(self) -> int:
        return self._n_controls

    @property
    def capabilities(self) -> TrackerCapabilities:
        return TrackerCapabilities()

    @property
    def transcript(self) -> list[str]:
        return list(self._transcript)

    def _fail(self, message: str):
        raise TrackerError(message, self._transcript)

    def _start(self):
        logging.info("Starting tracker process: %s", " ".join(self._command))
        try:
            self._process = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            self._fail(f"Unable to start tracker process {self._command!r} ({e})")

        def read_lines(stream, lines):
            for line in stream:
                lines.put(line)
            lines.put(None)

        threading.Thread(
            target=read_lines, args=(self._process.stdout, self._lines), daemon=True
        ).start()

    def track(self, v: ArrayLike, theta_T: ArrayLike) -> ControlVector:
        request = json.dumps(
            {
                "theta_T": [float(x) for x in np.asarray(theta_T, dtype=np.float64)],
                "v": [float(x) for x in np.asarray(v, dtype=np.float64)],
            }
        )
        with self._lock:
            if self._process is None:
                self._start()
            if self._process.poll() is not None:
                self._fail(f"Tracker process exited with code {self._process.returncode}")

            self._transcript.append("> " + _excerpt(request))
            try:
                self._process.stdin.write(request + "\n")
                self._process.stdin.flush()
            except OSError as e:
                self._fail(f"Unable to write to tracker process ({e})")

            try:
                line = self._lines.get(timeout=self._timeout)
            except queue.Empty:
                # A late answer must not be read as the reply to the next request
                self._stop(kill=True)
                self._fail(f"Tracker did not answer within {self._timeout} s")

            if line is None:
                self._fail("Tracker process closed its output")
            self._transcript.append("< " + _excerpt(line))

        return self._parse_response(line)

    def _parse_response(self, line: str) -> ControlVector:
        try:
            response = json.loads(line)
            c = np.asarray(response["c"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            self._fail(f"Malformed tracker response ({e})")

        if c.shape != (self._n_controls,):
            self._fail(f"Tracker returned {c.size} controls, expected {self._n_controls}")
        if not np.all(np.isfinite(c)):
            self._fail("Tracker returned non-finite controls")
        return c

    def _stop(self, kill: bool = False):
        if self._process is None:
            return
        if kill:
            logging.warning("Killing unresponsive tracker process %d", self._process.pid)
            self._process.kill()
        elif self._process.stdin:
            self._process.stdin.close()
        try:
            self._process.wait(timeout=self._timeout)
        except subprocess.TimeoutExpired:
            self._process.kill()
            self._process.wait()
        if self._process.stdin and not self._process.stdin.closed:
            self._process.stdin.close()
        self._process = None
        self._lines = queue.Queue()

    def close(self):
        with self._lock:
            self._stop()

    def __enter__(self):
        return self

    def __exit__(self, *_):
        self.close()
