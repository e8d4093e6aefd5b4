"""The deployable Tool Provider service.

Ties the modules together behind HTTP: launch validation, student content
and quiz submission (with synchronous grade passback), authoring CRUD and
search, and the player page. Request handling is fully concurrent; the
nonce store, session table, consumer registry, and document store are the
only shared state and each carries its own lock.
"""

from __future__ import annotations

import json
import time
from importlib import resources
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request, Response
from fastapi.responses import HTMLResponse, PlainTextResponse, RedirectResponse

from .config import ServiceConfig
from .content import (
    ContentNotFound,
    ContentValidationError,
    DuplicateContentId,
    EmptyQuery,
    FileContentStore,
    MicroContent,
    VersionConflict,
    canonical_json,
    grade_quiz,
    score_quiz,
    strip_answer_keys,
)
from .launch import (
    UNKNOWN_CONTENT,
    ConsumerRegistry,
    LaunchRejected,
    LaunchRequest,
    LaunchValidator,
    SessionStore,
)
from .oauth1 import NonceStore, parse_form_body
from .outcomes import (
    OutcomeError,
    OutcomeRequest,
    SignatureRejected,
    TransportFailure,
    new_message_id,
    send_outcome,
)

SESSION_COOKIE = "microlti_session"


class ToolProviderService:
    """All service state for one deployment: restart-safe stores (consumers,
    content) plus per-process state (nonces, sessions)."""

    def __init__(
        self,
        config: ServiceConfig,
        *,
        outcome_http_post: Callable[[str, dict[str, str], bytes], tuple[int, bytes]] | None = None,
    ):
        self.config = config
        config.storage_path.mkdir(parents=True, exist_ok=True)
        self.registry = ConsumerRegistry(path=config.storage_path / "consumers.json")
        self.store = FileContentStore(config.storage_path / "content")
        self.nonce_store = NonceStore(window=config.timestamp_window)
        self.sessions = SessionStore()
        self.validator = LaunchValidator(
            self.registry,
            self.nonce_store,
            self.store.exists,
            session_store=self.sessions,
            timestamp_window=config.timestamp_window,
            session_ttl=config.session_ttl,
        )
        self.outcome_http_post = outcome_http_post

    def launch_url_for(self, content_id: str) -> str:
        return f"{self.config.external_base_url}/lti/launch/{content_id}"


def json_response(payload, status_code: int = 200) -> Response:
    return Response(content=canonical_json(payload), status_code=status_code, media_type="application/json")


def create_app(service: ToolProviderService) -> FastAPI:
    app = FastAPI(title="microlti tool provider", docs_url=None, redoc_url=None)
    config = service.config

    def bearer_token(request: Request) -> str | None:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def authorized(request: Request) -> bool:
        token = bearer_token(request)
        return token is not None and token in config.authoring_tokens.values()

    @app.post("/lti/launch/{content_id}")
    async def lti_launch(content_id: str, request: Request):
        body = await request.body()
        pairs = parse_form_body(body)
        url = f"{config.external_base_url}{request.url.path}"
        if request.url.query:
            url += f"?{request.url.query}"
        launch = LaunchRequest.from_form(request.method, url, pairs)
        try:
            session = service.validator.validate(launch)
        except LaunchRejected as rejected:
            if rejected.reasons == [UNKNOWN_CONTENT]:
                return PlainTextResponse("unknown-content", status_code=404)
            return PlainTextResponse("\n".join(rejected.reasons), status_code=401)
        response = RedirectResponse(url=f"/player?token={session.token}", status_code=302)
        response.set_cookie(SESSION_COOKIE, session.token, max_age=session.ttl, httponly=True)
        return response

    @app.get("/api/session/{token}/content")
    def session_content(token: str):
        session = service.sessions.get(token, int(time.time()))
        if session is None:
            return PlainTextResponse("unknown or expired session", status_code=401)
        try:
            doc = service.store.get(session.content_id)
        except ContentNotFound:
            return PlainTextResponse("content no longer available", status_code=404)
        return json_response(strip_answer_keys(doc.to_dict()))

    @app.post("/api/session/{token}/submit")
    async def session_submit(token: str, request: Request):
        session = service.sessions.get(token, int(time.time()))
        if session is None:
            return PlainTextResponse("unknown or expired session", status_code=401)
        try:
            payload = json.loads(await request.body())
        except json.JSONDecodeError:
            return PlainTextResponse("body must be JSON", status_code=422)
        answers = payload.get("answers") if isinstance(payload, dict) else None
        if not isinstance(answers, list):
            return PlainTextResponse('body must be {"answers": [...]}', status_code=422)
        try:
            doc = service.store.get(session.content_id)
        except ContentNotFound:
            return PlainTextResponse("content no longer available", status_code=404)

        score = score_quiz(doc, answers)
        per_question = [
            {"correct": correct, "feedback": feedback} for correct, feedback in grade_quiz(doc, answers)
        ]
        passback = _deliver_outcome(service, session, score)
        return json_response({"score": score, "per_question": per_question, "passback": passback})

    @app.post("/api/content")
    async def create_content(request: Request):
        if not authorized(request):
            return PlainTextResponse("authoring token required", status_code=401)
        try:
            doc = MicroContent.from_dict(json.loads(await request.body()))
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            return PlainTextResponse(f"unparseable document: {exc}", status_code=422)
        try:
            content_id = service.store.create(doc)
        except ContentValidationError as exc:
            return json_response(exc.report.to_dict(), status_code=422)
        except DuplicateContentId:
            return PlainTextResponse(f"content id {doc.id!r} already exists", status_code=409)
        return json_response({"id": content_id, "launch_url": service.launch_url_for(content_id)}, status_code=201)

    @app.put("/api/content/{content_id}")
    async def update_content(content_id: str, request: Request):
        if not authorized(request):
            return PlainTextResponse("authoring token required", status_code=401)
        try:
            raw = json.loads(await request.body())
            doc = MicroContent.from_dict(raw)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            return PlainTextResponse(f"unparseable document: {exc}", status_code=422)
        expected_version = raw.get("version", 1)
        try:
            new_version = service.store.update(content_id, doc, expected_version)
        except ContentNotFound:
            return PlainTextResponse(f"no content {content_id!r}", status_code=404)
        except VersionConflict as exc:
            return PlainTextResponse(str(exc), status_code=409)
        except ContentValidationError as exc:
            return json_response(exc.report.to_dict(), status_code=422)
        return json_response({"id": content_id, "version": new_version})

    @app.get("/api/content/{content_id}")
    def get_content(content_id: str, request: Request):
        if not authorized(request):
            return PlainTextResponse("authoring token required", status_code=401)
        try:
            doc = service.store.get(content_id)
        except ContentNotFound:
            return PlainTextResponse(f"no content {content_id!r}", status_code=404)
        return json_response(doc.to_dict())

    @app.get("/api/content")
    def search_content(request: Request, tags: str = ""):
        if not authorized(request):
            return PlainTextResponse("authoring token required", status_code=401)
        terms = [t for t in tags.split(",") if t.strip()]
        try:
            hits = service.store.search_by_tags(terms)
        except EmptyQuery:
            return PlainTextResponse("query needs at least one tag", status_code=422)
        return json_response([{"id": content_id, "score": score} for content_id, score in hits])

    @app.get("/player")
    def player_page():
        return HTMLResponse(_static_asset("player.html"))

    @app.get("/static/{asset_name}")
    def player_asset(asset_name: str):
        if "/" in asset_name or asset_name.startswith("."):
            return PlainTextResponse("not found", status_code=404)
        media_type = _MEDIA_TYPES.get(Path(asset_name).suffix, "application/octet-stream")
        return Response(content=_static_asset(asset_name), media_type=media_type)

    return app


def _deliver_outcome(service: ToolProviderService, session, score: float) -> dict:
    """Synchronous replaceResult to the consumer; the submission response
    carries the passback status so the player can surface it."""
    if not session.result_sourcedid or not session.outcome_service_url:
        return {"status": "not-configured", "reason": None}
    request = OutcomeRequest(
        operation="replaceResult",
        message_id=new_message_id(),
        sourced_id=session.result_sourcedid,
        score=score,
    )
    credential = service.registry.get(session.consumer_key)
    if credential is None:
        return {"status": "failed", "reason": "consumer no longer registered"}
    try:
        response = send_outcome(
            session.outcome_service_url,
            credential,
            request,
            http_post=service.outcome_http_post,
        )
    except TransportFailure as exc:
        return {"status": "failed", "reason": f"transport-failure: {exc}"}
    except SignatureRejected as exc:
        return {"status": "failed", "reason": f"signature-rejected: {exc}"}
    except OutcomeError as exc:
        return {"status": "failed", "reason": str(exc)}
    if not response.is_success:
        return {"status": "failed", "reason": response.description or "consumer reported failure"}
    return {"status": "delivered", "reason": None}


_MEDIA_TYPES = {
    ".js": "application/javascript",
    ".html": "text/html; charset=utf-8",
    ".css": "text/css",
    ".map": "application/json",
}


def _static_asset(name: str) -> bytes:
    asset = resources.files("microlti").joinpath("static", name)
    if not asset.is_file():
        if name.endswith(".html"):
            return (
                b"<!doctype html><meta charset='utf-8'><title>microlti player</title>"
                b"<p>Player assets are not built. Build the frontend package and copy "
                b"its output into microlti/static/.</p>"
            )
        return b"// player assets not built\n"
    return asset.read_bytes()
