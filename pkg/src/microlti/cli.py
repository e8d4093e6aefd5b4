"""Admin CLI: consumer registration, content import/export, serving,
and the self-contained launch/submit/passback demo loop."""

from __future__ import annotations

import secrets
import sys
import tempfile
import threading
import time
from pathlib import Path

import click
import httpx
import uvicorn

from .config import ServiceConfig, load_config
from .content import ContentValidationError, DuplicateContentId, export_ndjson, import_ndjson
from .fixtures import FIXTURE_CONTENT_ID, all_correct_answers, sample_content, three_of_four_answers
from .launch import ConsumerCredential, DuplicateConsumerKey
from .service import ToolProviderService, create_app
from .simulator import ToolConsumerSimulator, create_simulator_app


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Key-value config file; MICROLTI_* environment variables override it.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    """Micro-learning tool provider."""
    ctx.obj = config_path


def _config(ctx: click.Context) -> ServiceConfig:
    return load_config(ctx.obj)


@main.command("register-consumer")
@click.argument("key")
@click.argument("secret")
@click.argument("lms_name", default="")
@click.pass_context
def register_consumer(ctx: click.Context, key: str, secret: str, lms_name: str):
    """Register an LMS identity (consumer key + shared secret)."""
    service = ToolProviderService(_config(ctx))
    try:
        cred = service.registry.register(key, secret, lms_name)
    except (DuplicateConsumerKey, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        raise SystemExit(1)
    click.echo(f"registered consumer {cred.consumer_key!r} ({cred.lms_name or 'unnamed LMS'})")


@main.command("import-content")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def import_content(ctx: click.Context, file: str):
    """Bulk-validate and load a newline-delimited JSON stream of documents."""
    service = ToolProviderService(_config(ctx))
    try:
        with open(file, "rb") as handle:
            created = import_ndjson(service.store, handle)
    except ContentValidationError as exc:
        for rule_id, message in exc.report.errors:
            click.echo(f"error [{rule_id}] {message}", err=True)
        raise SystemExit(1)
    except DuplicateContentId as exc:
        click.echo(f"error: duplicate content id {exc}", err=True)
        raise SystemExit(1)
    for content_id in created:
        click.echo(f"imported {content_id} -> {service.launch_url_for(content_id)}")


@main.command("export-content")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def export_content(ctx: click.Context, output: str | None):
    """Write every stored document as newline-delimited canonical JSON."""
    service = ToolProviderService(_config(ctx))
    stream = sys.stdout.buffer if output is None else open(output, "wb")
    try:
        for line in export_ndjson(service.store):
            stream.write(line)
    finally:
        if output is not None:
            stream.close()


@main.command("serve")
@click.option("--listen", default=None, help="host:port override")
@click.pass_context
def serve(ctx: click.Context, listen: str | None):
    """Run the tool provider."""
    config = _config(ctx)
    if listen:
        config.listen = listen
    host, port = _split_listen(config.listen)
    service = ToolProviderService(config)
    uvicorn.run(create_app(service), host=host, port=port, log_level="info")


@main.command("sim-serve")
@click.option("--listen", default="127.0.0.1:8801", help="host:port for the simulator")
@click.option("--key", required=True, help="consumer key the simulator signs with")
@click.option("--secret", required=True, help="shared secret for that key")
@click.option("--state", type=click.Path(dir_okay=False), default=None,
              help="JSON file persisting the gradebook across restarts")
def sim_serve(listen: str, key: str, secret: str, state: str | None):
    """Run the simulated LMS as a standalone listener."""
    host, port = _split_listen(listen)
    cred = ConsumerCredential(consumer_key=key, shared_secret=secret, lms_name="simulated LMS")
    sim = ToolConsumerSimulator(
        cred, outcome_service_url=f"http://{host}:{port}/sim/outcomes", state_path=state
    )
    uvicorn.run(create_simulator_app(sim), host=host, port=port, log_level="info")


@main.command("simulate")
@click.pass_context
def simulate(ctx: click.Context):
    """Boot the service plus the simulated LMS, run one full
    launch -> submit -> passback loop, and print the gradebook delta.
    Exits nonzero on any mismatch."""
    with tempfile.TemporaryDirectory(prefix="microlti-sim-") as tmp:
        config = load_config(ctx.obj) if ctx.obj else ServiceConfig(storage_path=Path(tmp))
        raise SystemExit(_run_simulation(config))


def _run_simulation(config: ServiceConfig) -> int:
    service = ToolProviderService(config)
    secret = secrets.token_hex(16)
    try:
        cred = service.registry.register("sim-lms", secret, "Simulated LMS")
    except DuplicateConsumerKey:
        click.echo("error: consumer key 'sim-lms' already registered in this storage", err=True)
        return 1
    if not service.store.exists(FIXTURE_CONTENT_ID):
        service.store.create(sample_content())

    sim = ToolConsumerSimulator(cred, outcome_service_url="pending")
    provider_server = _ServerThread(create_app(service))
    sim_server = _ServerThread(create_simulator_app(sim))
    try:
        provider_base = provider_server.start()
        sim_base = sim_server.start()
        service.config.external_base_url = provider_base
        sim.outcome_service_url = f"{sim_base}/sim/outcomes"

        with httpx.Client(follow_redirects=False, timeout=10.0) as client:
            failures: list[str] = []
            first = _run_loop(client, provider_base, sim_base, three_of_four_answers(), 0.75, failures)
            if first is not None:
                before, after = first
                click.echo(f"gradebook {before!r} -> {after!r} (expected 0.75)")
            second = _run_loop(client, provider_base, sim_base, all_correct_answers(), 1.0, failures)
            if second is not None:
                before, after = second
                click.echo(f"gradebook {before!r} -> {after!r} (expected 1.0 overwrite)")
            if failures:
                for failure in failures:
                    click.echo(f"MISMATCH: {failure}", err=True)
                return 1
            click.echo("simulation loop complete: all checks passed")
            return 0
    finally:
        provider_server.stop()
        sim_server.stop()


def _run_loop(
    client: httpx.Client,
    provider_base: str,
    sim_base: str,
    answers: list,
    expected_score: float,
    failures: list[str],
) -> tuple[float | None, float | None] | None:
    launch_url = f"{provider_base}/lti/launch/{FIXTURE_CONTENT_ID}"
    form = client.get(
        f"{sim_base}/sim/launch-form",
        params={"user_id": "student-1", "content_id": FIXTURE_CONTENT_ID, "launch_url": launch_url},
    ).json()
    sourced_id = form["params"]["lis_result_sourcedid"]
    before = client.get(f"{sim_base}/sim/gradebook/{sourced_id}").json().get("score")

    launch = client.post(launch_url, data=form["params"])
    if launch.status_code != 302:
        failures.append(f"launch returned HTTP {launch.status_code}: {launch.text}")
        return None
    token = launch.headers["location"].split("token=", 1)[1]

    content = client.get(f"{provider_base}/api/session/{token}/content")
    if content.status_code != 200:
        failures.append(f"content fetch returned HTTP {content.status_code}")
        return None
    if any("correct" in q for q in content.json()["quiz"]):
        failures.append("student content response leaked answer keys")

    submit = client.post(f"{provider_base}/api/session/{token}/submit", json={"answers": answers})
    if submit.status_code != 200:
        failures.append(f"submit returned HTTP {submit.status_code}: {submit.text}")
        return None
    result = submit.json()
    if abs(result["score"] - expected_score) > 1e-9:
        failures.append(f"submit score {result['score']} != expected {expected_score}")
    if result["passback"]["status"] != "delivered":
        failures.append(f"passback status {result['passback']}")

    after = client.get(f"{sim_base}/sim/gradebook/{sourced_id}").json().get("score")
    if after is None or abs(after - expected_score) > 1e-4:
        failures.append(f"gradebook score {after!r} != expected {expected_score}")
    return before, after


class _ServerThread:
    """uvicorn on an ephemeral localhost port, run in a daemon thread."""

    def __init__(self, app):
        self._server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning"))
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def start(self, timeout: float = 10.0) -> str:
        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server failed to start")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def stop(self) -> None:
        self._server.should_exit = True
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)


def _split_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"listen address must be host:port, got {listen!r}")
    return host, int(port)


if __name__ == "__main__":
    main()
