"""Echo adapter: the protocol fixture that replies with its stored box.

    python -m uav_adapter_sdk.echo [--box x,y,w,h]

init stores the box; track echoes it with score 1.0; detect returns it as
a single detection (or an empty list while no box is known). ``--box``
preseeds the box so a detector session works without an init.
"""

from __future__ import annotations

import argparse
import sys

from . import serve


def build_callbacks(initial_box=None):
    state = {"box": tuple(initial_box) if initial_box else None}

    def on_init(image_path, box):
        state["box"] = box

    def on_track(image_path):
        return state["box"], 1.0

    def on_detect(image_path):
        if state["box"] is None:
            return []
        return [(state["box"], 1.0)]

    return on_init, on_track, on_detect


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="echo plug-in over stdio")
    parser.add_argument("--box", help="preseed box as x,y,w,h")
    args = parser.parse_args(argv)
    box = None
    if args.box:
        box = tuple(float(v) for v in args.box.split(","))
    on_init, on_track, on_detect = build_callbacks(box)
    return serve(init=on_init, track=on_track, detect=on_detect)


if __name__ == "__main__":
    sys.exit(main())
