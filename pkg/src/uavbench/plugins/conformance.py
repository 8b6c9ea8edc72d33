"""Host-side conformance suite for external plug-ins.

Checks the full command set against a live subprocess: init/track/detect
replies, malformed-input rejection (the plug-in must answer with an error
reply and keep serving), unknown-command handling, and clean shutdown with
exit code 0. Returns a list of failure descriptions; empty means pass.
"""

from __future__ import annotations

import json
import math

from ..errors import PluginProtocolError
from ..geometry import Box
from .transport import PluginProcess


def _valid_scored_reply(obj) -> bool:
    try:
        x, y, w, h = (float(v) for v in obj["box"])
        score = float(obj["score"])
    except (KeyError, TypeError, ValueError):
        return False
    return (all(math.isfinite(v) for v in (x, y, w, h))
            and w > 0 and h > 0 and math.isfinite(score) and 0.0 <= score <= 1.0)


def run_conformance(command: list[str], image_path, box: Box,
                    require=("track", "detect")) -> list[str]:
    """Exercise one plug-in command against the wire contract.

    ``require`` lists the capabilities that must answer with a valid
    payload; a capability not required may instead answer with a
    well-formed error reply (the plug-in must keep serving either way).
    """
    failures: list[str] = []
    proc = PluginProcess(command)
    try:
        reply = proc.exchange(json.dumps(
            {"cmd": "init", "image": str(image_path), "box": list(box.as_tuple())}))
        if reply != {"ok": True}:
            failures.append(f"init reply {reply!r}, expected {{'ok': True}}")

        reply = proc.exchange(json.dumps({"cmd": "track", "image": str(image_path)}))
        if not _valid_scored_reply(reply) and ("track" in require or "error" not in reply):
            failures.append(f"track reply invalid: {reply!r}")

        reply = proc.exchange(json.dumps({"cmd": "detect", "image": str(image_path)}))
        dets = reply.get("detections") if isinstance(reply, dict) else None
        detect_ok = isinstance(dets, list) and all(_valid_scored_reply(d) for d in dets)
        if not detect_ok and ("detect" in require or "error" not in reply):
            failures.append(f"detect reply invalid: {reply!r}")

        reply = proc.exchange("this is not json")
        if "error" not in reply:
            failures.append(f"malformed line got {reply!r}, expected an error reply")

        reply = proc.exchange(json.dumps({"cmd": "frobnicate"}))
        if "error" not in reply:
            failures.append(f"unknown command got {reply!r}, expected an error reply")

        # plug-in must still be serving after rejected inputs
        probe = "track" if "track" in require else "detect"
        reply = proc.exchange(json.dumps({"cmd": probe, "image": str(image_path)}))
        if probe == "track":
            alive = _valid_scored_reply(reply)
        else:
            dets = reply.get("detections") if isinstance(reply, dict) else None
            alive = isinstance(dets, list) and all(_valid_scored_reply(d) for d in dets)
        if not alive:
            failures.append(f"{probe} after rejected inputs invalid: {reply!r}")

        proc.shutdown()
    except PluginProtocolError as exc:
        failures.append(f"protocol error: {exc}")
        proc.kill()
    return failures
