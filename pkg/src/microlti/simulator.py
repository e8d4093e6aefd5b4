"""Simulated Tool Consumer: the LMS side of the protocol loop, offline.

Generates correctly signed launch forms, hosts the outcome endpoint with
full OAuth body-hash verification, and keeps a gradebook — so the whole
launch/consume/passback cycle is testable without a real LMS. Fault
injection (clock skew, nonce reuse, signature corruption, secret
mismatch) is first-class configuration because the negative paths are
the point.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from .launch import (
    EXPECTED_CALLBACK,
    EXPECTED_OAUTH_VERSION,
    LAUNCH_LTI_VERSION,
    LAUNCH_MESSAGE_TYPE,
    ConsumerCredential,
)
from .oauth1 import (
    SIGNATURE_METHOD,
    SignableRequest,
    body_hash,
    parse_authorization_header,
    sign_request,
    verify_signature,
)
from .outcomes import (
    OutcomeError,
    OutcomeRequest,
    OutcomeResponse,
    build_outcome_response_xml,
    parse_outcome_xml,
)


class GradebookEntryNotFound(Exception):
    pass


@dataclass(frozen=True)
class SimulatedUser:
    user_id: str
    display_name: str = ""
    roles: str = "Learner"


@dataclass
class GradebookEntry:
    sourced_id: str
    user_id: str
    resource_link_id: str
    score: float | None = None
    updated_at: int = 0

    def to_dict(self) -> dict:
        return {
            "sourced_id": self.sourced_id,
            "user_id": self.user_id,
            "resource_link_id": self.resource_link_id,
            "score": self.score,
            "updated_at": self.updated_at,
        }


@dataclass
class FaultInjection:
    """Deliberate protocol violations for negative-path testing."""

    clock_skew: int = 0
    reuse_last_nonce: bool = False
    corrupt_signature: bool = False
    sign_secret_override: str | None = None


class ToolConsumerSimulator:
    """An LMS stub bound to one registered credential.

    One sourcedid is minted per (user, resource link) pair and reused on
    later launches, matching gradebook semantics: replaceResult simply
    overwrites the same cell. With a ``state_path`` the gradebook and the
    sourcedid table persist across restarts.
    """

    def __init__(
        self,
        credential: ConsumerCredential,
        outcome_service_url: str,
        *,
        faults: FaultInjection | None = None,
        state_path: str | Path | None = None,
    ):
        self.credential = credential
        self.outcome_service_url = outcome_service_url
        self.faults = faults or FaultInjection()
        self._gradebook: dict[str, GradebookEntry] = {}
        self._sourcedids: dict[tuple[str, str], str] = {}
        self._last_nonce: str | None = None
        self._lock = threading.Lock()
        self._state_path = Path(state_path) if state_path is not None else None
        self._load_state()

    # launch side ---------------------------------------------------------
    def make_launch_form(
        self,
        user: SimulatedUser,
        content_id: str,
        launch_url: str,
        *,
        now: int | None = None,
        overrides: dict[str, str | None] | None = None,
        method: str = "POST",
    ) -> dict[str, str]:
        """Full signed launch parameter map for POSTing to the provider.

        ``overrides`` mutate the parameter set BEFORE signing (a None value
        removes the parameter), so a single protocol violation can be
        injected while the signature stays valid. The signature is computed
        for ``method``, letting tests exercise the method check in
        isolation too.
        """
        now = int(time.time()) if now is None else now
        resource_link_id = f"rl-{content_id}"
        with self._lock:
            nonce = uuid.uuid4().hex
            if self.faults.reuse_last_nonce and self._last_nonce is not None:
                nonce = self._last_nonce
            self._last_nonce = nonce
            sourced_id = self._sourcedid_for(user.user_id, resource_link_id)

        params: dict[str, str] = {
            "oauth_consumer_key": self.credential.consumer_key,
            "oauth_nonce": nonce,
            "oauth_timestamp": str(now + self.faults.clock_skew),
            "oauth_signature_method": SIGNATURE_METHOD,
            "oauth_version": EXPECTED_OAUTH_VERSION,
            "oauth_callback": EXPECTED_CALLBACK,
            "lti_message_type": LAUNCH_MESSAGE_TYPE,
            "lti_version": LAUNCH_LTI_VERSION,
            "resource_link_id": resource_link_id,
            "resource_link_title": f"Micro-content {content_id}",
            "user_id": user.user_id,
            "roles": user.roles,
            "lis_result_sourcedid": sourced_id,
            "lis_outcome_service_url": self.outcome_service_url,
            "custom_content_id": content_id,
        }
        for name, value in (overrides or {}).items():
            if value is None:
                params.pop(name, None)
            else:
                params[name] = value

        secret = self.faults.sign_secret_override or self.credential.shared_secret
        signable = SignableRequest.build(method, launch_url, list(params.items()))
        signature = sign_request(signable, secret)
        if self.faults.corrupt_signature:
            signature = ("X" if signature[0] != "X" else "Y") + signature[1:]
        params["oauth_signature"] = signature
        return params

    def _sourcedid_for(self, user_id: str, resource_link_id: str) -> str:
        key = (user_id, resource_link_id)
        sourced_id = self._sourcedids.get(key)
        if sourced_id is None:
            sourced_id = f"sb-{uuid.uuid4().hex}"
            self._sourcedids[key] = sourced_id
            self._gradebook[sourced_id] = GradebookEntry(
                sourced_id=sourced_id, user_id=user_id, resource_link_id=resource_link_id
            )
            self._save_state()
        return sourced_id

    # outcome side ----------------------------------------------------------
    def handle_outcome_request(
        self, method: str, url: str, headers: dict[str, str], body: bytes
    ) -> tuple[int, bytes]:
        """The outcome endpoint: verify the OAuth header and body hash, then
        apply the operation to the gradebook. Returns (status, response body);
        authentication failures are HTTP 401, protocol-level problems are POX
        failure envelopes."""
        auth = next((v for k, v in headers.items() if k.lower() == "authorization"), "")
        try:
            oauth_params = parse_authorization_header(auth)
        except ValueError:
            return 401, b"missing or malformed OAuth authorization header"

        presented = oauth_params.pop("oauth_signature", "")
        if oauth_params.get("oauth_consumer_key") != self.credential.consumer_key:
            return 401, b"unknown consumer key"
        if oauth_params.get("oauth_signature_method") != SIGNATURE_METHOD:
            return 401, b"unsupported signature method"
        if oauth_params.get("oauth_body_hash") != body_hash(body):
            return 401, b"body hash mismatch"
        signable = SignableRequest.build(method, url, list(oauth_params.items()), body=body)
        if not verify_signature(signable, presented, self.credential.shared_secret):
            return 401, b"signature mismatch"

        try:
            request = parse_outcome_xml(body)
        except OutcomeError as exc:
            return 200, build_outcome_response_xml(
                OutcomeResponse(status="failure", message_ref="", description=str(exc)),
                "unknown",
            )
        if not isinstance(request, OutcomeRequest):
            return 200, build_outcome_response_xml(
                OutcomeResponse(status="failure", message_ref="", description="expected a request envelope"),
                "unknown",
            )
        response = self._apply(request)
        return 200, build_outcome_response_xml(response, request.operation)

    def _apply(self, request: OutcomeRequest) -> OutcomeResponse:
        with self._lock:
            entry = self._gradebook.get(request.sourced_id)
            if entry is None:
                return OutcomeResponse(
                    status="failure",
                    message_ref=request.message_id,
                    description=f"sourcedId {request.sourced_id} not found",
                )
            if request.operation == "replaceResult":
                if request.score is None:
                    return OutcomeResponse(
                        status="failure", message_ref=request.message_id, description="missing resultScore"
                    )
                if not 0.0 <= request.score <= 1.0:
                    return OutcomeResponse(
                        status="failure",
                        message_ref=request.message_id,
                        description=f"resultScore {request.score} outside the 0..1 interval",
                    )
                entry.score = request.score
                entry.updated_at = int(time.time())
                self._save_state()
                return OutcomeResponse(
                    status="success",
                    message_ref=request.message_id,
                    description=f"Score for {request.sourced_id} is now {request.score}",
                )
            if request.operation == "readResult":
                return OutcomeResponse(
                    status="success",
                    message_ref=request.message_id,
                    description=f"Result for {request.sourced_id}",
                    score=entry.score,
                )
            # deleteResult
            entry.score = None
            entry.updated_at = int(time.time())
            self._save_state()
            return OutcomeResponse(
                status="success",
                message_ref=request.message_id,
                description=f"Score for {request.sourced_id} deleted",
            )

    # gradebook ----------------------------------------------------------
    def gradebook_get(self, sourced_id: str) -> GradebookEntry:
        with self._lock:
            entry = self._gradebook.get(sourced_id)
            if entry is None:
                raise GradebookEntryNotFound(sourced_id)
            return replace(entry)

    def sourcedid_for(self, user_id: str, content_id: str) -> str | None:
        """Observability helper: the gradebook cell a user/content pair maps to."""
        with self._lock:
            return self._sourcedids.get((user_id, f"rl-{content_id}"))

    # persistence ----------------------------------------------------------
    def _save_state(self) -> None:
        if self._state_path is None:
            return
        state = {
            "gradebook": {sid: e.to_dict() for sid, e in self._gradebook.items()},
            "sourcedids": {f"{u}\n{r}": sid for (u, r), sid in self._sourcedids.items()},
        }
        self._state_path.parent.mkdir(parents=True, exist_ok=True)
        self._state_path.write_text(json.dumps(state, sort_keys=True, indent=2), encoding="utf-8")

    def _load_state(self) -> None:
        if self._state_path is None or not self._state_path.exists():
            return
        state = json.loads(self._state_path.read_text(encoding="utf-8"))
        for sid, entry in state.get("gradebook", {}).items():
            self._gradebook[sid] = GradebookEntry(**entry)
        for key, sid in state.get("sourcedids", {}).items():
            user_id, _, resource_link_id = key.partition("\n")
            self._sourcedids[(user_id, resource_link_id)] = sid


def create_simulator_app(sim: ToolConsumerSimulator) -> FastAPI:
    """Standalone HTTP listener for manual demos against a running provider:
    launch-form minting, the outcome endpoint, and gradebook reads."""
    app = FastAPI(title="microlti consumer simulator", docs_url=None, redoc_url=None)

    @app.get("/sim/launch-form")
    def launch_form(user_id: str, content_id: str, launch_url: str):
        user = SimulatedUser(user_id=user_id)
        params = sim.make_launch_form(user, content_id, launch_url)
        return JSONResponse({"action": launch_url, "params": params})

    @app.post("/sim/outcomes")
    async def outcomes(request: Request):
        body = await request.body()
        status, payload = sim.handle_outcome_request(
            request.method, str(request.url), dict(request.headers), body
        )
        media_type = "application/xml" if status == 200 else "text/plain"
        return Response(content=payload, status_code=status, media_type=media_type)

    @app.get("/sim/gradebook/{sourced_id}")
    def gradebook(sourced_id: str):
        try:
            entry = sim.gradebook_get(sourced_id)
        except GradebookEntryNotFound:
            return PlainTextResponse(f"no gradebook entry {sourced_id!r}", status_code=404)
        return JSONResponse(entry.to_dict())

    return app
