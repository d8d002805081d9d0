"""Run configuration: JSON config file, environment variables, and CLI overrides.

Precedence is CLI > environment > file. The recognized environment
variables are COMPLETION_URL, COMPLETION_TOKEN, TOD_URL, and PARSER_URL.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Mapping

from .engine import SessionLimits
from .providers import CompletionParams, HTTPCompletion, HTTPTOD, ScriptedCompletion, \
    ScriptedTOD


class ConfigError(ValueError):
    pass


@dataclass
class ProviderSpec:
    kind: str = "http"  # "http" | "scripted"
    url: str | None = None
    token: str | None = None
    script: tuple[str, ...] = ()
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 0.5

    def validate(self, role: str) -> None:
        if self.kind not in ("http", "scripted"):
            raise ConfigError(f"{role} provider kind must be http or scripted, got {self.kind!r}")
        if self.kind == "http" and not self.url:
            raise ConfigError(f"{role} provider is http but has no url "
                              f"(set it in the config file or the environment)")


@dataclass
class RunConfig:
    completion: ProviderSpec = field(default_factory=ProviderSpec)
    tod: ProviderSpec = field(default_factory=ProviderSpec)
    goals: str | None = None
    exemplars: str | None = None
    ontology: str | None = None
    gold: str | None = None
    seed: int | None = None
    temperature: float = 0.5
    max_context: int = 2048
    max_turn_pairs: int = 10
    loop_window: int = 2
    loop_repeats: int = 2
    include_reqt: bool = True
    output: str | None = None
    parallelism: int = 1
    parser_url: str | None = None
    cache_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    service_token: str | None = None
    instructions: tuple[str, ...] = ()
    fixed_clock: float | None = None

    def completion_params(self) -> CompletionParams:
        return CompletionParams(temperature=self.temperature, max_context=self.max_context,
                                seed=self.seed)

    def session_limits(self) -> SessionLimits:
        return SessionLimits(max_turn_pairs=self.max_turn_pairs,
                             loop_window=self.loop_window, loop_repeats=self.loop_repeats)


def _provider_spec(raw: dict | None) -> ProviderSpec:
    raw = raw or {}
    spec = ProviderSpec()
    for f in fields(ProviderSpec):
        if f.name in raw:
            value = raw[f.name]
            if f.name == "script" and isinstance(value, list):
                value = tuple(value)
            setattr(spec, f.name, value)
    return spec


def load_run_config(path: str | Path | None = None,
                    env: Mapping[str, str] | None = None,
                    overrides: Mapping[str, object] | None = None) -> RunConfig:
    """Assemble a RunConfig with precedence CLI overrides > env > config file."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc

    config = RunConfig(completion=_provider_spec(raw.get("completion")),
                       tod=_provider_spec(raw.get("tod")))
    simple = {f.name for f in fields(RunConfig)} - {"completion", "tod", "instructions"}
    for name in simple:
        if name in raw:
            setattr(config, name, raw[name])
    if "instructions" in raw:
        config.instructions = tuple(raw["instructions"])

    if env.get("COMPLETION_URL"):
        config.completion.url = env["COMPLETION_URL"]
        config.completion.kind = "http"
    if env.get("COMPLETION_TOKEN"):
        config.completion.token = env["COMPLETION_TOKEN"]
    if env.get("TOD_URL"):
        config.tod.url = env["TOD_URL"]
        config.tod.kind = "http"
    if env.get("PARSER_URL"):
        config.parser_url = env["PARSER_URL"]

    for name, value in (overrides or {}).items():
        if value is None:
            continue
        if not hasattr(config, name):
            raise ConfigError(f"unknown config override {name!r}")
        setattr(config, name, value)
    return config


def completion_factory(spec: ProviderSpec) -> Callable[[], object]:
    """Factory invoked once per dialogue; scripted providers replay per dialogue."""
    spec.validate("completion")
    if spec.kind == "scripted":
        script = list(spec.script)
        return lambda: ScriptedCompletion(script)
    client = HTTPCompletion(spec.url, token=spec.token, timeout=spec.timeout,
                            retries=spec.retries, backoff=spec.backoff)
    return lambda: client


def tod_factory(spec: ProviderSpec) -> Callable[[], object]:
    spec.validate("tod")
    if spec.kind == "scripted":
        script = list(spec.script)
        return lambda: ScriptedTOD(script)
    client = HTTPTOD(spec.url, token=spec.token, timeout=spec.timeout,
                     retries=spec.retries, backoff=spec.backoff)
    return lambda: client
