#!/usr/bin/env python3
"""Stub completion/TOD/parser HTTP endpoints for live manual testing.

Serves, on one port:
  POST /complete  {prompt, temperature, max_tokens, stop[]} -> {text}
  POST /respond   {history, user_utterance}                 -> {system_utterance}
  POST /parse     {text}                                    -> {conllu}

The completion stub cycles canned user utterances (ending with the
end-of-dialogue token); the TOD stub echoes delexicalized confirmations;
the parser stub emits a flat left-headed dependency tree per token.

Usage: python3 scripts/stub_endpoints.py [--port 9099]
"""

import argparse
import itertools
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import uvicorn  # noqa: E402
from fastapi import FastAPI  # noqa: E402
from pydantic import BaseModel  # noqa: E402

USER_LINES = itertools.cycle([
    "I am looking for a cheap place to stay in the north.",
    "yes, book it for 2 people and 3 nights from tuesday.",
    "thank you, that is everything. <end_dialog>",
])

TOD_LINES = itertools.cycle([
    "there are [value_choice] [value_type] that match . any other preferences ?",
    "I have booked [value_name] for you . your reference number is [value_reference] .",
    "you are welcome . have a great day .",
])


class CompleteBody(BaseModel):
    prompt: str
    temperature: float = 0.5
    max_tokens: int = 256
    stop: list[str] = []


class RespondBody(BaseModel):
    history: list[dict]
    user_utterance: str


class ParseBody(BaseModel):
    text: str


def build_app() -> FastAPI:
    app = FastAPI(title="todsim stub endpoints")

    @app.post("/complete")
    def complete(body: CompleteBody):
        return {"text": next(USER_LINES)}

    @app.post("/respond")
    def respond(body: RespondBody):
        return {"system_utterance": next(TOD_LINES)}

    @app.post("/parse")
    def parse(body: ParseBody):
        words = body.text.split() or ["_"]
        lines = []
        for i, word in enumerate(words, start=1):
            head = 0 if i == 1 else i - 1
            rel = "root" if head == 0 else "dep"
            upos = "PUNCT" if word in {".", ",", "!", "?"} else "X"
            lines.append(f"{i}\t{word}\t{word}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_")
        return {"conllu": "\n".join(lines) + "\n"}

    return app


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9099)
    args = parser.parse_args()
    uvicorn.run(build_app(), host=args.host, port=args.port)
