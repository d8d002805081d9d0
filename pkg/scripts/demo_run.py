#!/usr/bin/env python3
"""End-to-end demo on scripted providers: simulate -> evaluate -> metrics.

Writes a small goal set, exemplar file, and config into ./runs/demo and
drives the CLI over them; no network or live endpoints needed.
"""

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from todsim.cli import main  # noqa: E402

DEMO_DIR = Path("runs") / "demo"

USER_SCRIPT = [
    "I would like to book a train from leicester to cambridge on friday.",
    "I would like to leave at 20:30.",
    "yes, please.",
    "2",
    "thank you. <end_dialog>",
]

TOD_SCRIPT = [
    "there are [value_choice] trains that meet your criteria . do you have a time "
    "you would like to leave or arrive by ?",
    "I have train [value_id] leaving at [value_leave] and arriving at [value_arrive] . "
    "would you like me to book that for you ?",
    "how many tickets do you need ?",
    "I have booked you [value_people] ticket on [value_id] . your reference number "
    "is [value_reference] .",
]

EXEMPLARS = [
    {
        "goal": {"taxi": {"info": {"destination": "pizza hut fen ditton",
                                   "leaveAt": "17:15"},
                          "reqt": ["car type", "phone"]}},
        "turns": [
            {"speaker": "user",
             "text": "I need a taxi to pizza hut fen ditton leaving after 17:15.",
             "raw_text": "I need a taxi to pizza hut fen ditton leaving after 17:15."},
            {"speaker": "system",
             "text": "I have booked a [value_car] for you . the contact number is "
                     "[value_phone] .",
             "raw_text": "I have booked a [value_car] for you . the contact number is "
                         "[value_phone] ."},
            {"speaker": "user", "text": "great, thank you!",
             "raw_text": "great, thank you! <end_dialog>"},
        ],
    },
    {
        "goal": {"attraction": {"info": {"type": "museum", "area": "centre"},
                                "reqt": ["entrance fee"]}},
        "turns": [
            {"speaker": "user", "text": "Can you recommend a museum in the centre of town?",
             "raw_text": "Can you recommend a museum in the centre of town?"},
            {"speaker": "system",
             "text": "[value_name] is in the [value_area] . the entrance fee is "
                     "[value_price] .",
             "raw_text": "[value_name] is in the [value_area] . the entrance fee is "
                         "[value_price] ."},
            {"speaker": "user", "text": "perfect, that is all I needed.",
             "raw_text": "perfect, that is all I needed. <end_dialog>"},
        ],
    },
]


def write_inputs() -> Path:
    DEMO_DIR.mkdir(parents=True, exist_ok=True)
    domains = ["train", "hotel", "restaurant", "attraction", "taxi"]
    goal_lines = []
    for i in range(15):
        mapping = {d: {"info": {"area": f"zone{i}"}} for d in domains[:i % 3 + 1]}
        goal_lines.append(json.dumps(mapping))
    (DEMO_DIR / "goals.jsonl").write_text("\n".join(goal_lines) + "\n")
    (DEMO_DIR / "exemplars.jsonl").write_text(
        "\n".join(json.dumps(e) for e in EXEMPLARS) + "\n")
    config = {
        "completion": {"kind": "scripted", "script": USER_SCRIPT},
        "tod": {"kind": "scripted", "script": TOD_SCRIPT},
        "goals": str(DEMO_DIR / "goals.jsonl"),
        "exemplars": str(DEMO_DIR / "exemplars.jsonl"),
        "seed": 7,
    }
    config_path = DEMO_DIR / "config.json"
    config_path.write_text(json.dumps(config, indent=2))
    return config_path


def run() -> int:
    config_path = write_inputs()
    sim_out = DEMO_DIR / "sim"
    print("== simulate ==")
    if main(["simulate", "--config", str(config_path), "--output", str(sim_out)]):
        return 1
    print("\n== evaluate ==")
    if main(["evaluate", "--transcripts", str(sim_out / "transcripts.jsonl"),
             "--goals", str(DEMO_DIR / "goals.jsonl"),
             "--output", str(DEMO_DIR / "eval")]):
        return 1
    print("\n== metrics ==")
    return main(["metrics", "--transcripts", str(sim_out / "transcripts.jsonl"),
                 "--output", str(DEMO_DIR / "metrics")])


if __name__ == "__main__":
    raise SystemExit(run())
