"""Command-line entry point: simulate | gold | evaluate | metrics | serve."""

from __future__ import annotations

import argparse
import json
import socket
import sys
import time
from pathlib import Path

from . import corpus
from .config import ConfigError, RunConfig, completion_factory, load_run_config, tod_factory
from .dialogue import PromptTemplate, Speaker
from .diversity import parse_conllu, diversity_report
from .engine import SimulationConfig, run_batch, run_gold_turn
from .providers import ProviderError
from .success import Ontology, aggregate_by_intent, evaluate_success, render_report


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _resolve_output(command: str, override: str | None) -> Path:
    if override:
        out = Path(override)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out = Path("runs") / f"{command}-{stamp}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise ConfigError(f"no {what} file configured")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} file does not exist: {p}")
    return p


def _load_config(args: argparse.Namespace, override_names: list[str]) -> RunConfig:
    overrides = {name: getattr(args, name, None) for name in override_names}
    return load_run_config(getattr(args, "config", None), overrides=overrides)


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args, ["goals", "exemplars", "ontology", "seed", "temperature",
                                     "max_context", "max_turn_pairs", "output", "parallelism"])
        if config.seed is None:
            raise ConfigError("simulate requires a seed (--seed or config file)")
        goal_path = _require_file(config.goals, "goal")
        exemplar_path = _require_file(config.exemplars, "exemplar")
        loaded = corpus.load_goals(goal_path)
        pool = corpus.load_exemplars(exemplar_path)
        if not len(pool):
            raise ConfigError(f"exemplar file {exemplar_path} holds no usable exemplars")
        ontology = corpus.load_ontology(_require_file(config.ontology, "ontology")) \
            if config.ontology else None
        out_dir = _resolve_output("simulate", config.output)
        sim = SimulationConfig(
            completion_factory=completion_factory(config.completion),
            tod_factory=tod_factory(config.tod),
            params=config.completion_params(),
            limits=config.session_limits(),
            template=PromptTemplate(include_reqt=config.include_reqt),
            ontology=ontology,
            out_dir=out_dir,
            goal_file=str(goal_path),
            exemplar_count=min(2, len(pool)),
            parallelism=config.parallelism,
        )
        if config.fixed_clock is not None:
            value = config.fixed_clock
            sim.clock = lambda: value
    except (ConfigError, corpus.FileUnreadable) as exc:
        return _fail(str(exc))

    if loaded.rejects:
        print(f"rejected {len(loaded.rejects)} malformed goal records", file=sys.stderr)
    manifest = run_batch(loaded.goals, pool.exemplars, config.seed, sim)
    print(f"run {manifest.run_id}: {len(manifest.transcripts)} dialogues -> {out_dir}")
    for kind, count in manifest.termination_counts.items():
        print(f"  {kind}: {count}")
    print(f"manifest: {out_dir / 'manifest.json'}")
    return 0


def cmd_gold(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args, ["gold", "exemplars", "seed", "temperature",
                                     "max_context", "output"])
        gold_path = _require_file(config.gold, "gold context")
        exemplar_path = _require_file(config.exemplars, "exemplar")
        contexts = corpus.load_gold_contexts(gold_path)
        pool = corpus.load_exemplars(exemplar_path)
        exemplars = corpus.select_exemplars(pool, k=min(2, len(pool)),
                                            seed=config.seed or 0)
        factory = completion_factory(config.completion)
        out_dir = _resolve_output("gold", config.output)
    except (ConfigError, corpus.FileUnreadable, corpus.PoolTooSmall) as exc:
        return _fail(str(exc))

    params = config.completion_params()
    errors = 0
    out_path = out_dir / "gold_turns.jsonl"
    with out_path.open("w", encoding="utf-8") as handle:
        for i, context in enumerate(contexts):
            record: dict = {"index": i, "reference": context.reference}
            try:
                turn = run_gold_turn(context.history, context.goal, exemplars, factory(),
                                     params=params)
                record.update({"generated": turn.text, "is_end": turn.is_end})
            except ProviderError as exc:
                errors += 1
                record["error"] = str(exc)
            handle.write(json.dumps(record) + "\n")
    print(f"{len(contexts)} gold contexts -> {out_path}")
    if errors:
        print(f"warning: {errors} contexts failed with provider errors", file=sys.stderr)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        transcript_path = _require_file(args.transcripts, "transcript")
        goal_path = _require_file(args.goals, "goal")
        transcripts = corpus.read_transcripts(transcript_path)
        loaded = corpus.load_goals(goal_path)
        if len(transcripts) != len(loaded.goals):
            return _fail(f"{len(transcripts)} transcripts vs {len(loaded.goals)} goals: "
                         "inputs are misaligned")
        ontology = corpus.load_ontology(_require_file(args.ontology, "ontology")) \
            if args.ontology else Ontology.permissive_default()
        references = None
        if args.references:
            ref_path = _require_file(args.references, "reference")
            references = [json.loads(line) if line.strip() else None
                          for line in ref_path.read_text(encoding="utf-8").splitlines()]
        trees = None
        if args.conllu:
            conllu_path = _require_file(args.conllu, "CoNLL-U")
            # one tree per user turn, pooled per dialogue in file order
            all_trees = parse_conllu(conllu_path.read_text(encoding="utf-8"))
            trees = []
            cursor = 0
            for transcript in transcripts:
                n = len(transcript.user_turns())
                trees.append(all_trees[cursor:cursor + n])
                cursor += n
        out_dir = _resolve_output("evaluate", args.output)
    except (ConfigError, corpus.FileUnreadable) as exc:
        return _fail(str(exc))

    results = [evaluate_success(t, g, ontology)
               for t, g in zip(transcripts, loaded.goals)]
    rows = aggregate_by_intent(results, loaded.goals, transcripts=transcripts,
                               references=references, trees=trees)
    table = render_report(rows)
    print(table)
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    (out_dir / "report.json").write_text(
        json.dumps([row.as_record() for row in rows], indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    try:
        transcript_path = _require_file(args.transcripts, "transcript")
        transcripts = corpus.read_transcripts(transcript_path)
        utterances = [t.text for transcript in transcripts
                      for t in transcript.turns if t.speaker is Speaker.USER]
        trees = None
        if args.conllu:
            trees = parse_conllu(_require_file(args.conllu, "CoNLL-U")
                                 .read_text(encoding="utf-8"))
        elif args.parser_url:
            cache = corpus.ParseCache(args.cache_dir) if args.cache_dir else None
            conllu = corpus.fetch_parses(utterances, args.parser_url, cache)
            trees = parse_conllu(conllu)
        out_dir = _resolve_output("metrics", args.output)
    except (ConfigError, corpus.FileUnreadable, ProviderError) as exc:
        return _fail(str(exc))

    report = diversity_report(utterances, trees)
    print(report.render())
    (out_dir / "metrics.json").write_text(
        json.dumps(report.as_record(), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import DEFAULT_INSTRUCTIONS, TranscriptStore, create_app

    try:
        config = _load_config(args, ["goals", "host", "port", "output"])
        goal_path = _require_file(config.goals, "goal")
        loaded = corpus.load_goals(goal_path)
        goal_store = {
            (goal.source_id or f"goal-{i:04d}"): goal
            for i, goal in enumerate(loaded.goals)
        }
        tod = tod_factory(config.tod)()
        out_dir = _resolve_output("serve", config.output)
    except (ConfigError, corpus.FileUnreadable) as exc:
        return _fail(str(exc))

    # surface bind failures as a clean nonzero exit instead of a uvicorn traceback
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        return _fail(f"cannot bind {config.host}:{config.port}: {exc}")
    finally:
        probe.close()

    store = TranscriptStore(out_dir / "human2bot.jsonl")
    instructions = config.instructions or DEFAULT_INSTRUCTIONS
    app = create_app(goal_store, tod, store, instructions=instructions,
                     auth_token=config.service_token)
    print(f"serving {len(goal_store)} goals on {config.host}:{config.port}; "
          f"transcripts -> {store.path}")
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="todsim",
        description="User-simulator harness for task-oriented dialogue systems")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run interactive dialogues over a goal file")
    sim.add_argument("--config", help="JSON config file")
    sim.add_argument("--goals", help="goal file (JSONL logical form or MultiWOZ bundle)")
    sim.add_argument("--exemplars", help="exemplar transcript JSONL")
    sim.add_argument("--ontology", help="ontology JSON for inform classification")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--temperature", type=float)
    sim.add_argument("--max-context", dest="max_context", type=int)
    sim.add_argument("--max-turn-pairs", dest="max_turn_pairs", type=int)
    sim.add_argument("--parallelism", type=int)
    sim.add_argument("--output")
    sim.set_defaults(func=cmd_simulate)

    gold = sub.add_parser("gold", help="generate single user turns from gold histories")
    gold.add_argument("--config")
    gold.add_argument("--gold", help="gold context JSONL ({goal, history, reference})")
    gold.add_argument("--exemplars")
    gold.add_argument("--seed", type=int)
    gold.add_argument("--temperature", type=float)
    gold.add_argument("--max-context", dest="max_context", type=int)
    gold.add_argument("--output")
    gold.set_defaults(func=cmd_gold)

    ev = sub.add_parser("evaluate", help="score transcripts against goals")
    ev.add_argument("--transcripts", required=True)
    ev.add_argument("--goals", required=True)
    ev.add_argument("--ontology")
    ev.add_argument("--references", help="JSONL of per-dialogue reference user utterances")
    ev.add_argument("--conllu", help="CoNLL-U parses of user turns, in transcript order")
    ev.add_argument("--output")
    ev.set_defaults(func=cmd_evaluate)

    met = sub.add_parser("metrics", help="diversity metrics over transcript user turns")
    met.add_argument("--transcripts", required=True)
    met.add_argument("--conllu")
    met.add_argument("--parser-url", dest="parser_url")
    met.add_argument("--cache-dir", dest="cache_dir")
    met.add_argument("--output")
    met.set_defaults(func=cmd_metrics)

    srv = sub.add_parser("serve", help="host the human2bot collection service")
    srv.add_argument("--config")
    srv.add_argument("--goals")
    srv.add_argument("--host")
    srv.add_argument("--port", type=int)
    srv.add_argument("--output")
    srv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def entrypoint() -> None:  # console_scripts hook
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
