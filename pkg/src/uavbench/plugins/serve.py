"""Expose an in-process plug-in over the wire protocol.

    python -m uavbench.plugins.serve ncc
    python -m uavbench.plugins.serve echo:10,20,30,40
    python -m uavbench.plugins.serve template:<image>:x,y,w,h

Used by the transport-transparency tests and anywhere a reference plug-in
must run out of process. Handled failures are reported as {"error": ...}
replies; the loop keeps serving until shutdown (exit 0) or EOF (exit 1).
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, HarnessError
from ..geometry import Box


def _dispatch(plugin, request: dict) -> dict:
    cmd = request.get("cmd")
    if cmd == "init":
        x, y, w, h = (float(v) for v in request["box"])
        plugin.init(request["image"], Box(x, y, w, h))
        return {"ok": True}
    if cmd == "track":
        sb = plugin.track(request["image"])
        return {"box": list(sb.box.as_tuple()), "score": sb.score}
    if cmd == "detect":
        dets = plugin.detect(request["image"])
        return {"detections": [{"box": list(d.box.as_tuple()), "score": d.score} for d in dets]}
    return {"error": f"unknown command {cmd!r}"}


def serve_plugin(plugin, stdin=None, stdout=None) -> int:
    """Run the message loop until shutdown (0) or broken stream (1)."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
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
            if request.get("cmd") == "shutdown":
                return 0
            try:
                reply = _dispatch(plugin, request)
            except (HarnessError, AttributeError, KeyError, TypeError, ValueError) as exc:
                reply = {"error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 1  # stream ended without shutdown


def _resolve(spec: str):
    from . import resolve_detector, resolve_tracker

    name = spec.partition(":")[0]
    if name in ("ncc", "scripted"):
        return resolve_tracker(spec)
    if name == "template":
        return resolve_detector(spec)
    if name == "echo":
        return resolve_tracker(spec)  # echo serves track and detect
    raise ConfigError(f"cannot serve spec {spec!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="serve a reference plug-in over stdio")
    parser.add_argument("spec", help="plug-in spec, e.g. ncc or echo:1,2,3,4")
    args = parser.parse_args(argv)
    return serve_plugin(_resolve(args.spec))


if __name__ == "__main__":
    sys.exit(main())
