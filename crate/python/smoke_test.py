#!/usr/bin/env python3
"""Smoke test for the rptg_py extension module.

Builds nothing itself: run `cargo build -p rptg-py --release` (or debug)
first. The script locates the cdylib, exposes it as an importable module,
and checks a few exact values on a small worked example.
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_extension():
    names = ["librptg_py.so", "rptg_py.so", "librptg_py.dylib", "rptg_py.pyd"]
    for profile in ("release", "debug"):
        for name in names:
            cand = ROOT / "target" / profile / name
            if cand.exists():
                return cand
    sys.exit("build the extension first: cargo build -p rptg-py")


def import_module():
    src = locate_extension()
    tmp = tempfile.mkdtemp(prefix="rptg_py_")
    shutil.copy(src, pathlib.Path(tmp) / "rptg_py.so")
    sys.path.insert(0, tmp)
    import rptg_py  # noqa: E402

    return rptg_py


GAME = {
    "stage": "DwellPTG",
    "delta": "1/8",
    "clock_bound": 1,
    "locations": [
        {"id": "A", "owner": "P2", "price": -1},
        {"id": "B", "owner": "P1", "price": 1},
        {
            "id": "T",
            "owner": "P2",
            "price": 0,
            "target": True,
            "goal_fn": [[0, 3], ["1/2", 0], [1, 0]],
        },
    ],
    "transitions": [
        {"id": "a_to_b", "src": "A", "guard": {"lo": 0, "hi": 1}, "dst": "B"},
        {"id": "a_to_t", "src": "A", "guard": {"lo": 1, "hi": 1}, "dst": "T"},
        {"id": "b_to_t", "src": "B", "guard": {"lo": 0, "hi": 1}, "dst": "T"},
    ],
    "initial": ["A"],
}


def main():
    rptg = import_module()

    game = rptg.parse_game(json.dumps(GAME))
    assert game.stage == "DwellPTG"
    assert game.delta == "1/8"
    assert json.loads(game.validate()) == []

    result = rptg.solve(game, "1/10")
    assert result.value_at("B", "0") == "1/2", result.value_at("B", "0")
    assert result.value_at("B", "3/4") == "0"
    assert result.value_at("A", "0") == "1/2"
    assert result.value_at("A", "1/4") == result.value_at("B", "1/4")

    strategy = json.loads(result.strategy_json())
    b_rows = strategy["rows"]["B"]
    assert b_rows[0]["move"] == {"kind": "DelayUntil", "v": "1/2", "edge": "b_to_t"}

    # the extracted move replays to the promised cost
    play = {
        "start_loc": "B",
        "start_x": "0",
        "steps": [{"t": "1/2", "edge": "b_to_t"}],
    }
    reached, total = rptg.replay(game, json.dumps(play))
    assert reached and total == "1/2", (reached, total)

    # the independent grid oracle agrees at the origin
    values = rptg.oracle(game, 16)
    assert values["B"][0] == "1/2"

    # deterministic fixture generation round-trips through parse
    fixtures = rptg.fixtures(seed=7, count=2)
    assert fixtures == rptg.fixtures(seed=7, count=2)
    for text in fixtures:
        rptg.parse_game(text)

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
