"""HTTP session service for live human-vs-TOD chat collection.

Annotators are assigned a goal (shown in natural language) plus sampled
conversational-complexity instructions, exchange turns with the TOD endpoint,
and close the session themselves; there is no automatic loop or termination
detection for humans. Completed and abandoned sessions are persisted to an
append-only JSONL store in the transcript schema, with annotator id and the
instructions in the record metadata.
"""

from __future__ import annotations

import json
import random
import threading
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .dialogue import Speaker, Turn
from .goals import Goal, NlTemplates, MULTIWOZ_TEMPLATES, count_intents, goal_as_mapping, \
    render_natural_language
from .providers import ProviderError, TODProvider

DEFAULT_INSTRUCTIONS = (
    "At some point, give two values for a single slot and let the system pick "
    "(for example, ask for an italian or chinese restaurant).",
    "Change a previously stated slot value later in the conversation "
    "(for example, correct the day or the number of people after the system confirms).",
    "Ask for one of the details you need twice, phrased differently each time.",
    "Answer one system question with more information than was asked for.",
    "Give one piece of information indirectly instead of naming the slot value outright.",
)

AUTH_HEADER = "x-auth-token"


class SessionError(Exception):
    def __init__(self, kind: str, detail: str, status: int):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail
        self.status = status


@dataclass
class Session:
    session_id: str
    goal_id: str
    goal: Goal
    nl_goal: str
    complexity_instructions: list[str]
    annotator_id: str
    started: float
    turns: list[Turn] = field(default_factory=list)
    state: str = "Open"  # Open -> Completed | Abandoned
    lock: threading.Lock = field(default_factory=threading.Lock)

    def view(self) -> dict:
        return {
            "session_id": self.session_id,
            "goal_id": self.goal_id,
            "nl_goal": self.nl_goal,
            "complexity_instructions": list(self.complexity_instructions),
            "annotator_id": self.annotator_id,
            "state": self.state,
            "turns": [{"speaker": t.speaker.value, "text": t.text} for t in self.turns],
        }


class TranscriptStore:
    """Append-only JSONL store; each record is written as one atomic line."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._count = 0

    @property
    def path(self) -> Path:
        return self._path

    def append(self, record: dict) -> str:
        line = json.dumps(record) + "\n"
        with self._lock:
            with self._path.open("a", encoding="utf-8") as handle:
                handle.write(line)
                handle.flush()
            self._count += 1
            return f"{self._path}:{self._count}"

    def records(self) -> list[dict]:
        if not self._path.exists():
            return []
        return [json.loads(line) for line in
                self._path.read_text(encoding="utf-8").splitlines() if line.strip()]


class SessionService:
    """State and operations behind the HTTP surface; usable directly in tests."""

    def __init__(self, goals: dict[str, Goal], tod: TODProvider, store: TranscriptStore, *,
                 instructions: Sequence[str] = DEFAULT_INSTRUCTIONS,
                 instructions_per_session: int = 1,
                 nl_templates: NlTemplates = MULTIWOZ_TEMPLATES,
                 seed: int | None = None,
                 clock: Callable[[], float] = time.time):
        self._goals = dict(goals)
        self._tod = tod
        self._store = store
        self._instructions = list(instructions)
        self._per_session = min(instructions_per_session, len(self._instructions))
        self._templates = nl_templates
        self._rng = random.Random(seed)
        self._clock = clock
        self._sessions: dict[str, Session] = {}
        self._registry_lock = threading.Lock()

    def goals_listing(self) -> list[dict]:
        return [
            {
                "goal_id": goal_id,
                "nl_goal": render_natural_language(goal, self._templates),
                "domains": list(goal.domains),
                "intents": count_intents(goal),
            }
            for goal_id, goal in self._goals.items()
        ]

    def create_session(self, goal_id: str, annotator_id: str) -> Session:
        if not annotator_id:
            raise SessionError("MalformedRequest", "annotator_id must be non-empty", 422)
        goal = self._goals.get(goal_id)
        if goal is None:
            raise SessionError("UnknownGoal", f"no goal with id {goal_id!r}", 404)
        session = Session(
            session_id=uuid.uuid4().hex,
            goal_id=goal_id,
            goal=goal,
            nl_goal=render_natural_language(goal, self._templates),
            complexity_instructions=self._rng.sample(self._instructions, self._per_session),
            annotator_id=annotator_id,
            started=self._clock(),
        )
        with self._registry_lock:
            self._sessions[session.session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise SessionError("UnknownSession", f"no session {session_id!r}", 404)
        return session

    def post_message(self, session_id: str, text: str) -> str:
        """Relay a user turn to the TOD endpoint and append the (user, system) pair.

        The pair is appended atomically after the TOD reply arrives, so a
        provider failure leaves the session state untouched.
        """
        session = self.get_session(session_id)
        if not text:
            raise SessionError("MalformedRequest", "message text must be non-empty", 422)
        with session.lock:
            if session.state != "Open":
                raise SessionError("SessionClosed",
                                   f"session is {session.state}, not Open", 409)
            try:
                reply = self._tod.tod_respond(tuple(session.turns), text)
            except ProviderError as exc:
                raise SessionError("ProviderError", str(exc), 502) from exc
            base = len(session.turns)
            session.turns.append(Turn(Speaker.USER, text, text, base))
            session.turns.append(Turn(Speaker.SYSTEM, reply, reply, base + 1))
            return reply

    def complete_session(self, session_id: str,
                         outcome: Literal["Completed", "Abandoned"]) -> str:
        session = self.get_session(session_id)
        with session.lock:
            if session.state != "Open":
                raise SessionError("SessionClosed",
                                   f"session is {session.state}, not Open", 409)
            ref = self._persist(session, outcome)
            session.state = outcome
            return ref

    def drain(self) -> None:
        """Persist every still-open session as Abandoned (graceful shutdown)."""
        with self._registry_lock:
            sessions = list(self._sessions.values())
        for session in sessions:
            with session.lock:
                if session.state == "Open":
                    self._persist(session, "Abandoned")
                    session.state = "Abandoned"

    def _persist(self, session: Session, outcome: str) -> str:
        record = {
            "goal": goal_as_mapping(session.goal),
            "source_id": session.goal.source_id,
            "turns": [
                {"speaker": t.speaker.value, "text": t.text, "raw_text": t.raw_text}
                for t in session.turns
            ],
            "termination": {"kind": outcome, "detail": "session closed by annotator"},
            "provider_params": {},
            "exemplar_ids": [],
            "timestamps": {"started": session.started, "finished": self._clock()},
            "metadata": {
                "session_id": session.session_id,
                "goal_id": session.goal_id,
                "annotator_id": session.annotator_id,
                "complexity_instructions": list(session.complexity_instructions),
            },
        }
        return self._store.append(record)


class CreateSessionBody(BaseModel):
    goal_id: str
    annotator_id: str


class MessageBody(BaseModel):
    text: str


class CompleteBody(BaseModel):
    outcome: Literal["Completed", "Abandoned"]


def create_app(goals: dict[str, Goal], tod: TODProvider, store: TranscriptStore, *,
               instructions: Sequence[str] = DEFAULT_INSTRUCTIONS,
               instructions_per_session: int = 1,
               nl_templates: NlTemplates = MULTIWOZ_TEMPLATES,
               auth_token: str | None = None,
               seed: int | None = None) -> FastAPI:
    """Build the collection app; the SessionService is exposed as app.state.service."""
    service = SessionService(
        goals, tod, store, instructions=instructions,
        instructions_per_session=instructions_per_session,
        nl_templates=nl_templates, seed=seed)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.drain()

    app = FastAPI(title="todsim human2bot collection service", lifespan=lifespan)
    app.state.service = service

    def error_response(exc: SessionError) -> JSONResponse:
        return JSONResponse(status_code=exc.status,
                            content={"kind": exc.kind, "detail": exc.detail})

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        if auth_token is not None and request.headers.get(AUTH_HEADER) != auth_token:
            return JSONResponse(status_code=401,
                                content={"kind": "Unauthorized", "detail": "bad or missing token"})
        return await call_next(request)

    @app.exception_handler(SessionError)
    async def session_error_handler(request: Request, exc: SessionError):
        return error_response(exc)

    @app.get("/goals")
    def list_goals():
        return service.goals_listing()

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        return service.create_session(body.goal_id, body.annotator_id).view()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return service.get_session(session_id).view()

    @app.post("/sessions/{session_id}/message")
    def post_message(session_id: str, body: MessageBody):
        reply = service.post_message(session_id, body.text)
        return {"reply": reply}

    @app.post("/sessions/{session_id}/complete")
    def complete_session(session_id: str, body: CompleteBody):
        session = service.get_session(session_id)
        ref = service.complete_session(session_id, body.outcome)
        return {"transcript_ref": ref, "state": session.state,
                "turn_count": len(session.turns)}

    return app
