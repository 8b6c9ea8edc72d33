"""Host side of the external plug-in wire protocol.

One JSON message per line over the subprocess's standard streams, UTF-8:

    host -> plugin  {"cmd":"init","image":"<path>","box":[x,y,w,h]}
    plugin -> host  {"ok":true}
    host -> plugin  {"cmd":"track","image":"<path>"}
    plugin -> host  {"box":[x,y,w,h],"score":s}
    host -> plugin  {"cmd":"detect","image":"<path>"}
    plugin -> host  {"detections":[{"box":[x,y,w,h],"score":s}, ...]}
    host -> plugin  {"cmd":"shutdown"}   (no reply; process exits 0)

A plug-in signals a handled failure with {"error":"<message>"} and keeps
serving. Any malformed line, out-of-order reply, or nonzero exit is a
protocol error attributed to the plug-in, raised with its captured stderr.
"""

from __future__ import annotations

import collections
import json
import math
import subprocess
import threading

from ..errors import PluginProtocolError
from ..geometry import Box
from . import BaseDetector, BaseTracker, ScoredBox

_STDERR_KEEP_LINES = 200


class PluginProcess:
    """Line-oriented request/reply channel to one plug-in subprocess."""

    def __init__(self, command: list[str]):
        self.command = list(command)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise PluginProtocolError(f"failed to spawn plug-in {self.command}: {exc}") from exc
        self._stderr_tail = collections.deque(maxlen=_STDERR_KEEP_LINES)
        self._stderr_thread = threading.Thread(target=self._drain_stderr, daemon=True)
        self._stderr_thread.start()

    def _drain_stderr(self):
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    @property
    def diagnostics(self) -> str:
        return "\n".join(self._stderr_tail)

    def exchange(self, line: str) -> dict:
        """Send one raw line, read one reply line, parse it as JSON."""
        if self._proc.poll() is not None:
            raise PluginProtocolError(
                f"plug-in exited early with code {self._proc.returncode}",
                diagnostics=self.diagnostics)
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PluginProtocolError("plug-in stdin closed", diagnostics=self.diagnostics) from exc
        reply = self._proc.stdout.readline()
        if reply == "":
            raise PluginProtocolError("plug-in closed stdout before replying",
                                      diagnostics=self.diagnostics)
        try:
            parsed = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise PluginProtocolError(f"malformed reply line {reply!r}",
                                      diagnostics=self.diagnostics) from exc
        if not isinstance(parsed, dict):
            raise PluginProtocolError(f"reply is not an object: {reply!r}",
                                      diagnostics=self.diagnostics)
        return parsed

    def request(self, message: dict) -> dict:
        """Send a message and return the reply; error replies raise."""
        reply = self.exchange(json.dumps(message))
        if "error" in reply:
            raise PluginProtocolError(f"plug-in error reply: {reply['error']}",
                                      diagnostics=self.diagnostics)
        return reply

    def shutdown(self, timeout: float = 10.0) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"cmd": "shutdown"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self._proc.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
                raise PluginProtocolError("plug-in did not exit on shutdown",
                                          diagnostics=self.diagnostics)
        if self._proc.returncode != 0:
            raise PluginProtocolError(
                f"plug-in exited with nonzero code {self._proc.returncode}",
                diagnostics=self.diagnostics)

    def kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()


def _parse_scored_box(obj, context: str, diagnostics: str) -> ScoredBox:
    try:
        x, y, w, h = (float(v) for v in obj["box"])
        score = float(obj["score"])
    except (KeyError, TypeError, ValueError) as exc:
        raise PluginProtocolError(f"{context}: bad box/score in reply {obj!r}",
                                  diagnostics=diagnostics) from exc
    box = Box(x, y, w, h)
    if not box.is_valid() or not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise PluginProtocolError(
            f"{context}: reply violates output contract: box={box.as_tuple()} score={score}",
            diagnostics=diagnostics)
    return ScoredBox(box, score)


class SubprocessTracker(BaseTracker):
    """Tracker handle over an external command speaking the wire protocol."""

    def __init__(self, command: list[str]):
        self._proc = PluginProcess(command)

    def init(self, image_path, box: Box) -> None:
        box.validate()
        reply = self._proc.request(
            {"cmd": "init", "image": str(image_path), "box": list(box.as_tuple())})
        if reply.get("ok") is not True:
            raise PluginProtocolError(f"init got {reply!r} instead of ok",
                                      diagnostics=self._proc.diagnostics)

    def track(self, image_path) -> ScoredBox:
        reply = self._proc.request({"cmd": "track", "image": str(image_path)})
        return _parse_scored_box(reply, "track", self._proc.diagnostics)

    def close(self) -> None:
        self._proc.shutdown()


class SubprocessDetector(BaseDetector):
    """Detector handle over an external command speaking the wire protocol."""

    def __init__(self, command: list[str]):
        self._proc = PluginProcess(command)

    def detect(self, image_path) -> list[ScoredBox]:
        reply = self._proc.request({"cmd": "detect", "image": str(image_path)})
        dets = reply.get("detections")
        if not isinstance(dets, list):
            raise PluginProtocolError(f"detect reply missing detections list: {reply!r}",
                                      diagnostics=self._proc.diagnostics)
        return [_parse_scored_box(d, "detect", self._proc.diagnostics) for d in dets]

    def close(self) -> None:
        self._proc.shutdown()
