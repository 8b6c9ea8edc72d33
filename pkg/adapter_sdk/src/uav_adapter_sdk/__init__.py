"""Serve an arbitrary tracker/detector model over the stdio wire protocol.

The host sends one JSON message per line on stdin and reads one reply per
request on stdout, in order:

    {"cmd":"init","image":"<path>","box":[x,y,w,h]}  ->  {"ok":true}
    {"cmd":"track","image":"<path>"}                 ->  {"box":[x,y,w,h],"score":s}
    {"cmd":"detect","image":"<path>"}                ->  {"detections":[{"box":...,"score":s},...]}
    {"cmd":"shutdown"}                               ->  (no reply; exit 0)

Wrap a model by passing callbacks to :func:`serve`:

    serve(init=model.init, track=model.track, detect=model.detect)

Callback contracts (the adapter does no image decoding; the path is handed
through untouched):

    init(image_path, (x, y, w, h)) -> None
    track(image_path) -> ((x, y, w, h), score)
    detect(image_path) -> iterable of ((x, y, w, h), score)

Scores must already be calibrated to [0, 1]; an out-of-range score is an
adapter configuration error and is answered with {"error": ...} rather
than clamped. Callback exceptions also become error replies and the loop
keeps serving; only a broken stdin stream ends the process nonzero.
"""

from __future__ import annotations

import json
import math
import sys

__version__ = "0.1.0"

__all__ = ["AdapterSession", "serve"]


def _check_box(raw) -> tuple[float, float, float, float]:
    try:
        x, y, w, h = (float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"box must be [x,y,w,h], got {raw!r}") from exc
    if not all(math.isfinite(v) for v in (x, y, w, h)) or w <= 0 or h <= 0:
        raise ValueError(f"box must have finite coords and positive size, got {raw!r}")
    return (x, y, w, h)


def _check_scored(out, origin: str) -> dict:
    try:
        raw_box, raw_score = out
    except (TypeError, ValueError) as exc:
        raise ValueError(
            f"configuration error: {origin} must return ((x,y,w,h), score), got {out!r}") from exc
    box = _check_box(raw_box)
    score = float(raw_score)
    if not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise ValueError(
            f"configuration error: {origin} returned score {score!r} outside [0, 1]")
    return {"box": list(box), "score": score}


class AdapterSession:
    """Protocol state machine over the wrapped callbacks.

    ``handle`` maps one request to one reply dict, or None for shutdown.
    Tracking is rejected until init has succeeded (awaiting-init state);
    detection is stateless and allowed at any time.
    """

    def __init__(self, init=None, track=None, detect=None):
        self._init = init
        self._track = track
        self._detect = detect
        self._tracking = False

    def handle(self, request: dict) -> dict | None:
        cmd = request.get("cmd")
        if cmd == "shutdown":
            return None
        try:
            if cmd == "init":
                if self._init is None:
                    return {"error": "no init callback configured"}
                box = _check_box(request["box"])
                self._init(request["image"], box)
                self._tracking = True
                return {"ok": True}
            if cmd == "track":
                if self._track is None:
                    return {"error": "no track callback configured"}
                if not self._tracking:
                    return {"error": "track before init"}
                return _check_scored(self._track(request["image"]), "track callback")
            if cmd == "detect":
                if self._detect is None:
                    return {"error": "no detect callback configured"}
                dets = self._detect(request["image"])
                return {"detections": [_check_scored(d, "detect callback") for d in dets]}
            return {"error": f"unknown command {cmd!r}"}
        except Exception as exc:  # callback failure -> error reply, keep serving
            return {"error": f"{type(exc).__name__}: {exc}"}


def serve(init=None, track=None, detect=None, stdin=None, stdout=None) -> int:
    """Run the message loop. Returns 0 on shutdown, 1 on a broken stream."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    session = AdapterSession(init=init, track=track, detect=detect)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request is not an object")
        except ValueError as exc:
            reply = {"error": f"malformed request: {exc}"}
        else:
            reply = session.handle(request)
            if reply is None:
                return 0
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 1
