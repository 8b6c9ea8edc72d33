"""Tracker/detector plug-in surface.

A tracker handle is a stateful per-sequence session (init, then ordered
track calls); a detector handle is stateless across frames. Images cross
the plug-in boundary by file path, never by pixel payload, so the same
interface works in-process and over the subprocess wire protocol.

One handle must only be used from one thread; distinct handles may run
concurrently.
"""

from __future__ import annotations

import math
import shlex
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..errors import ConfigError, PluginProtocolError
from ..geometry import Box

__all__ = [
    "ScoredBox",
    "BaseTracker",
    "BaseDetector",
    "validate_output",
    "resolve_tracker",
    "resolve_detector",
]


@dataclass(frozen=True)
class ScoredBox:
    """A box plus a confidence score in [0, 1]."""

    box: Box
    score: float


def validate_output(sb: ScoredBox, origin: str = "plugin") -> ScoredBox:
    """Boundary check for plug-in outputs. Violations are protocol errors
    attributed to the plug-in; values are never clamped."""
    b = sb.box
    ok = (
        isinstance(sb.score, (int, float))
        and math.isfinite(sb.score)
        and 0.0 <= sb.score <= 1.0
        and b.is_valid()
    )
    if not ok:
        raise PluginProtocolError(
            f"{origin} produced invalid output: box={b.as_tuple()} score={sb.score!r}")
    return sb


class BaseTracker(ABC):
    """Stateful single-object tracker session."""

    @abstractmethod
    def init(self, image_path, box: Box) -> None:
        """Start (or restart) a session from a frame and its target box.
        Re-init on a live handle resets the session."""

    @abstractmethod
    def track(self, image_path) -> ScoredBox:
        """Return exactly one scored box for the next frame."""

    def close(self) -> None:
        pass


class BaseDetector(ABC):
    """Stateless per-image detector."""

    @abstractmethod
    def detect(self, image_path) -> list[ScoredBox]:
        """Return zero or more scored boxes, unsorted."""

    def close(self) -> None:
        pass


def _parse_box_csv(text: str) -> Box:
    parts = text.split(",")
    if len(parts) != 4:
        raise ConfigError(f"expected x,y,w,h, got {text!r}")
    return Box(*(float(p) for p in parts)).validate()


def resolve_tracker(spec: str) -> BaseTracker:
    """Build a tracker from a CLI spec string.

    Supported forms: ``ncc``, ``echo[:x,y,w,h]``, ``scripted:<path.json>``,
    ``cmd:<command line>`` (external process speaking the wire protocol).
    """
    from . import fixtures, reference, transport

    name, _, rest = spec.partition(":")
    if name == "ncc":
        return reference.NccTracker()
    if name == "echo":
        return fixtures.EchoPlugin(_parse_box_csv(rest) if rest else None)
    if name == "scripted":
        if not rest:
            raise ConfigError("scripted tracker needs a script path")
        return fixtures.ScriptedTracker.from_file(rest)
    if name == "cmd":
        if not rest:
            raise ConfigError("cmd tracker needs a command line")
        return transport.SubprocessTracker(shlex.split(rest))
    raise ConfigError(f"unknown tracker spec {spec!r}")


def resolve_detector(spec: str) -> BaseDetector:
    """Build a detector from a CLI spec string.

    Supported forms: ``template:<image>:x,y,w,h``, ``echo[:x,y,w,h]``,
    ``cmd:<command line>``.
    """
    from . import fixtures, reference, transport

    name, _, rest = spec.partition(":")
    if name == "template":
        image, _, box_text = rest.partition(":")
        if not image or not box_text:
            raise ConfigError("template detector spec is template:<image>:x,y,w,h")
        return reference.TemplateDetector.from_image(image, _parse_box_csv(box_text))
    if name == "echo":
        return fixtures.EchoPlugin(_parse_box_csv(rest) if rest else None)
    if name == "cmd":
        if not rest:
            raise ConfigError("cmd detector needs a command line")
        return transport.SubprocessDetector(shlex.split(rest))
    raise ConfigError(f"unknown detector spec {spec!r}")
