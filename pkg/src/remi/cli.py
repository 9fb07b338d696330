"""Operator and developer surface: terminal chat, seeding, transcript replay,
metrics reports, and the API server."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import EngineConfig, ServiceConfig
from .engine.engine import (
    SessionClosedError,
    SessionConflictError,
    UnknownMementoError,
    UnknownPersonError,
    UnknownSessionError,
)
from .engine.rules import RuleError
from .engine.session import SessionError
from .engine.templates import TemplateError
from .mementos import MementoError
from .runtime import Runtime, SeedError

_USER_ERRORS = (
    UnknownPersonError, UnknownMementoError, UnknownSessionError,
    SessionClosedError, SessionConflictError, SessionError,
    SeedError, RuleError, TemplateError, MementoError, ValueError,
)


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _runtime(ctx: click.Context) -> Runtime:
    options = ctx.obj
    config = EngineConfig()
    if options["config"]:
        config = ServiceConfig.load(options["config"]).engine
    runtime = Runtime(options["data_dir"], config=config, offline=options["offline"])
    if options["seed_demo"]:
        runtime.seed_demo()
    return runtime


@click.group()
@click.option("--data-dir", default="./remi-data", show_default=True, help="Store directory.")
@click.option("--config", type=click.Path(exists=True), default=None, help="Config file (JSON).")
@click.option("--offline", is_flag=True, help="Force the offline baseline adapters.")
@click.option("--json", "json_mode", is_flag=True, help="Machine-readable output.")
@click.option("--seed-demo", is_flag=True, help="Install the demo fixture before running.")
@click.pass_context
def main(ctx, data_dir, config, offline, json_mode, seed_demo):
    """remi: a reminiscence chatbot you can run entirely offline."""
    ctx.obj = {
        "data_dir": data_dir,
        "config": config,
        "offline": offline,
        "json": json_mode,
        "seed_demo": seed_demo,
    }


@main.command()
@click.argument("person_id")
@click.option("--memento", "memento_id", default=None, help="Memento id to open the session with.")
@click.option("--fixture", type=click.Path(exists=True), default=None,
              help="Feature fixture file; registers a new memento for this chat.")
@click.option("--uri", default="memento.jpg", show_default=True, help="Media reference for --fixture.")
@click.option("--rating", type=click.IntRange(1, 5), default=None, help="Engagement rating on exit.")
@click.pass_context
def chat(ctx, person_id, memento_id, fixture, uri, rating):
    """Interactive terminal session against the in-process engine."""
    runtime = _runtime(ctx)
    json_mode = ctx.obj["json"]
    try:
        if fixture:
            memento, flagged = runtime.register_memento(person_id, "picture", uri, "private", fixture)
            memento_id = memento.memento_id
            if flagged:
                click.echo("note: feature adapter unavailable; memento has no features", err=True)
        session = runtime.start_session(person_id, memento_id)
    except _USER_ERRORS as exc:
        _fail(str(exc))

    def show(turns):
        for turn in turns:
            if json_mode:
                click.echo(json.dumps(turn.to_doc(), ensure_ascii=False, sort_keys=True))
            elif turn.initiator == "bot":
                click.echo(f"bot> {turn.text}")

    show(session.turns)
    closed_by_bot = False
    while True:
        try:
            line = input("" if json_mode else "you> ")
        except EOFError:
            break
        if line.strip().lower() in ("quit", "exit"):
            break
        try:
            session, new_turns = runtime.process_user_turn(session.session_id, line)
        except _USER_ERRORS as exc:
            _fail(str(exc))
        show(new_turns)
        if new_turns[-1].action and new_turns[-1].action.kind == "close":
            closed_by_bot = True
            break

    _, report = runtime.close_session(session.session_id, rating)
    if json_mode:
        click.echo(json.dumps(report.to_doc(), ensure_ascii=False, sort_keys=True))
    else:
        if not closed_by_bot:
            click.echo("bot> Goodbye!")
        click.echo("--- session report ---")
        for key, value in sorted(report.to_doc().items()):
            click.echo(f"{key}: {value}")
    runtime.store.compact()


@main.command()
@click.option("--profiles", type=click.Path(exists=True), default=None)
@click.option("--mementos", type=click.Path(exists=True), default=None)
@click.option("--rules", type=click.Path(exists=True), default=None)
@click.option("--templates", type=click.Path(exists=True), default=None)
@click.option("--demo", is_flag=True, help="Install the built-in demo fixture.")
@click.pass_context
def seed(ctx, profiles, mementos, rules, templates, demo):
    """Load fixture databases into the store (idempotent)."""
    runtime = _runtime(ctx)
    try:
        if demo:
            summary = runtime.seed_demo()
        else:
            summary = runtime.seed(profiles, mementos, rules, templates)
    except _USER_ERRORS as exc:
        _fail(str(exc))
    runtime.store.compact()
    if ctx.obj["json"]:
        click.echo(json.dumps(summary, sort_keys=True))
    else:
        click.echo(", ".join(f"{k}: {v}" for k, v in sorted(summary.items())))


@main.command()
@click.argument("transcript", type=click.Path(exists=True))
@click.pass_context
def replay(ctx, transcript):
    """Feed a recorded transcript's user turns through the engine and report
    any divergence from the recorded bot turns."""
    runtime = _runtime(ctx)
    try:
        session_id, report, divergences = runtime.replay_transcript(
            Path(transcript).read_text(encoding="utf-8")
        )
    except _USER_ERRORS as exc:
        _fail(str(exc))
    runtime.store.compact()
    if ctx.obj["json"]:
        click.echo(json.dumps(
            {
                "session_id": session_id,
                "divergences": [vars(d) for d in divergences],
                "report": report,
            },
            ensure_ascii=False, sort_keys=True,
        ))
    else:
        click.echo(f"replayed as {session_id}: {len(divergences)} divergence(s)")
        for d in divergences:
            click.echo(f"  turn {d.turn_index}:")
            click.echo(f"    recorded: {d.recorded}")
            click.echo(f"    replayed: {d.replayed}")
        for key, value in sorted(report.items()):
            click.echo(f"{key}: {value}")
    if divergences:
        sys.exit(3)


@main.command()
@click.argument("session_id")
@click.pass_context
def transcript(ctx, session_id):
    """Print a session transcript (header line, then one turn per line)."""
    runtime = _runtime(ctx)
    try:
        click.echo(runtime.export_transcript(session_id), nl=False)
    except _USER_ERRORS as exc:
        _fail(str(exc))


@main.command()
@click.argument("person_id")
@click.option("--limit", default=3, show_default=True)
@click.pass_context
def suggest(ctx, person_id, limit):
    """Companion suggestions from life-model similarity."""
    runtime = _runtime(ctx)
    try:
        ranked = runtime.suggestions(person_id, limit)
    except _USER_ERRORS as exc:
        _fail(str(exc))
    if ctx.obj["json"]:
        click.echo(json.dumps(ranked, ensure_ascii=False, sort_keys=True))
        return
    if not ranked:
        click.echo("no suggestions above threshold")
    for row in ranked:
        shared = "; ".join(" ".join(t) for t in row["shared"])
        click.echo(f"{row['person_id']}  score={row['score']:.4f}  shared: {shared}")


@main.command()
@click.argument("session_id", required=False)
@click.option("--corpus", is_flag=True, help="Aggregate over all closed sessions.")
@click.pass_context
def metrics(ctx, session_id, corpus):
    """Per-session or corpus-level metric reports."""
    runtime = _runtime(ctx)
    if corpus:
        report = runtime.corpus_report()
        if ctx.obj["json"]:
            click.echo(json.dumps(report, sort_keys=True))
        else:
            click.echo(f"sessions: {report['sessions']}")
            for key, value in sorted(report["means"].items()):
                click.echo(f"{key}: {value:.4f}")
        return
    if not session_id:
        _fail("session_id required unless --corpus is given")
    try:
        report = runtime.get_metrics(session_id)
    except _USER_ERRORS as exc:
        _fail(str(exc))
    if ctx.obj["json"]:
        click.echo(json.dumps(report, ensure_ascii=False, sort_keys=True))
    else:
        for key, value in sorted(report.items()):
            click.echo(f"{key}: {value}")


@main.command()
@click.option("--k", "k", type=int, default=2, show_default=True, help="Number of clusters.")
@click.pass_context
def clusters(ctx, k):
    """Cluster the population by life-model similarity (k-medoids)."""
    runtime = _runtime(ctx)
    try:
        report = runtime.cluster_report(k)
    except _USER_ERRORS as exc:
        _fail(str(exc))
    runtime.store.compact()
    if ctx.obj["json"]:
        click.echo(json.dumps(report, ensure_ascii=False, sort_keys=True))
    else:
        for row in report["clusters"]:
            click.echo(f"{row['cluster_id']}  medoid={row['medoid']}  members: {', '.join(row['members'])}")


@main.command()
@click.option("--host", default=None, help="Override listen host.")
@click.option("--port", type=int, default=None, help="Override listen port.")
@click.pass_context
def serve(ctx, host, port):
    """Run the chat service (HTTP API + event streams + web UI)."""
    import uvicorn

    from .service import create_app

    options = ctx.obj
    config = ServiceConfig.load(options["config"]) if options["config"] else ServiceConfig.load()
    config.data_dir = options["data_dir"]
    runtime = Runtime(
        config.data_dir,
        config=config.engine,
        offline=options["offline"],
        wall_clock=getattr(config, "wall_clock", False),
    )
    if options["seed_demo"]:
        runtime.seed_demo()
    app = create_app(runtime, api_token=config.api_token, ui_dir=config.ui_dir)
    uvicorn.run(app, host=host or config.listen_host, port=port or config.listen_port)


if __name__ == "__main__":
    main()
