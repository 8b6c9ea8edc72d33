"""Trivial plug-ins used by protocol tests and synthetic fixtures."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import PluginError, UninitializedTrackerError
from ..geometry import Box
from . import BaseDetector, BaseTracker, ScoredBox


class EchoPlugin(BaseTracker, BaseDetector):
    """Echoes its stored box with score 1.0.

    The box is seeded at construction or by init(); detect() before any
    box is known returns an empty list.
    """

    def __init__(self, box: Box | None = None):
        if box is not None:
            box.validate()
        self._box = box

    def init(self, image_path, box: Box) -> None:
        box.validate()
        self._box = box

    def track(self, image_path) -> ScoredBox:
        if self._box is None:
            raise UninitializedTrackerError("echo track() before init()")
        return ScoredBox(self._box, 1.0)

    def detect(self, image_path) -> list[ScoredBox]:
        if self._box is None:
            return []
        return [ScoredBox(self._box, 1.0)]


class ScriptedTracker(BaseTracker):
    """Plays back a fixed list of (box, score) outputs, one per track call.

    init() rewinds the script; running past the end is a plug-in error.
    """

    def __init__(self, steps: list[ScoredBox]):
        self._steps = list(steps)
        self._pos: int | None = None

    @classmethod
    def from_file(cls, path) -> "ScriptedTracker":
        """Load steps from JSON: {"steps": [[x, y, w, h, score], ...]}."""
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        steps = [ScoredBox(Box(x, y, w, h), s) for x, y, w, h, s in data["steps"]]
        return cls(steps)

    def init(self, image_path, box: Box) -> None:
        box.validate()
        self._pos = 0

    def track(self, image_path) -> ScoredBox:
        if self._pos is None:
            raise UninitializedTrackerError("scripted track() before init()")
        if self._pos >= len(self._steps):
            raise PluginError(f"script exhausted after {len(self._steps)} steps")
        out = self._steps[self._pos]
        self._pos += 1
        return out


class ScriptedDetector(BaseDetector):
    """Returns pre-set detections keyed by image filename (empty otherwise)."""

    def __init__(self, by_name: dict[str, list[ScoredBox]]):
        self._by_name = {k: list(v) for k, v in by_name.items()}

    def detect(self, image_path) -> list[ScoredBox]:
        return list(self._by_name.get(Path(image_path).name, []))
