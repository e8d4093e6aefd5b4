"""LTI 1.1 Basic Launch validation and session issuance.

A launch is a signed form POST from the consumer. Validation applies the
ten protocol checks in order — method, message type, LTI version,
resource link, registered consumer, callback, OAuth version, timestamp,
nonce, signature — evaluating every check so a rejection reports all
failures at once, then resolves the target content and issues a session.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from urllib.parse import urlsplit

from .oauth1 import (
    DEFAULT_TIMESTAMP_WINDOW,
    SIGNATURE_METHOD,
    NonceStore,
    SignableRequest,
    check_timestamp,
    verify_signature,
)

LAUNCH_MESSAGE_TYPE = "basic-lti-launch-request"
LAUNCH_LTI_VERSION = "LTI-1p0"
EXPECTED_CALLBACK = "about:blank"
EXPECTED_OAUTH_VERSION = "1.0"

DEFAULT_SESSION_TTL = 3600

# Rejection reasons, one per check, in check order.
NOT_POST = "not-post"
BAD_MESSAGE_TYPE = "bad-message-type"
BAD_VERSION = "bad-version"
MISSING_RESOURCE_LINK = "missing-resource-link"
UNKNOWN_CONSUMER = "unknown-consumer"
BAD_CALLBACK = "bad-callback"
BAD_OAUTH_VERSION = "bad-oauth-version"
STALE_TIMESTAMP = "stale-timestamp"
REPLAYED_NONCE = "replayed-nonce"
BAD_SIGNATURE = "bad-signature"
UNKNOWN_CONTENT = "unknown-content"


class RegistryError(Exception):
    pass


class DuplicateConsumerKey(RegistryError):
    pass


class LaunchRejected(Exception):
    """Carries every failed check for the rejected launch."""

    def __init__(self, reasons: list[str]):
        super().__init__(", ".join(reasons))
        self.reasons = reasons


@dataclass(frozen=True)
class ConsumerCredential:
    consumer_key: str
    shared_secret: str
    lms_name: str = ""
    enabled: bool = True
    created_at: int = 0

    def to_dict(self) -> dict:
        return {
            "consumer_key": self.consumer_key,
            "shared_secret": self.shared_secret,
            "lms_name": self.lms_name,
            "enabled": self.enabled,
            "created_at": self.created_at,
        }


class ConsumerRegistry:
    """Registered consumer identities; reads are concurrent, writes serialized.

    With a path, the registry persists as a JSON file so credentials
    survive restarts.
    """

    def __init__(self, path: str | Path | None = None):
        self._lock = threading.Lock()
        self._path = Path(path) if path is not None else None
        self._consumers: dict[str, ConsumerCredential] = {}
        if self._path is not None and self._path.exists():
            for entry in json.loads(self._path.read_text(encoding="utf-8")):
                cred = ConsumerCredential(**entry)
                self._consumers[cred.consumer_key] = cred

    def register(self, key: str, secret: str, lms_name: str = "") -> ConsumerCredential:
        if not key:
            raise ValueError("consumer key must be nonempty")
        if not secret:
            raise ValueError("shared secret must be nonempty")
        with self._lock:
            if key in self._consumers:
                raise DuplicateConsumerKey(f"consumer key {key!r} is already registered")
            cred = ConsumerCredential(
                consumer_key=key, shared_secret=secret, lms_name=lms_name, created_at=int(time.time())
            )
            self._consumers[key] = cred
            self._save()
        return cred

    def get(self, key: str) -> ConsumerCredential | None:
        return self._consumers.get(key)

    def set_enabled(self, key: str, enabled: bool) -> None:
        with self._lock:
            cred = self._consumers.get(key)
            if cred is None:
                raise RegistryError(f"unknown consumer key {key!r}")
            self._consumers[key] = ConsumerCredential(
                consumer_key=cred.consumer_key,
                shared_secret=cred.shared_secret,
                lms_name=cred.lms_name,
                enabled=enabled,
                created_at=cred.created_at,
            )
            self._save()

    def keys(self) -> list[str]:
        return sorted(self._consumers)

    def _save(self) -> None:
        if self._path is None:
            return
        payload = [self._consumers[k].to_dict() for k in sorted(self._consumers)]
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class LaunchRequest:
    """A parsed launch POST. ``all_parameters`` keeps the received multiset
    losslessly; the named fields are the first occurrence of each name."""

    http_method: str
    url: str
    all_parameters: tuple[tuple[str, str], ...]
    oauth_consumer_key: str = ""
    oauth_signature: str = ""
    oauth_signature_method: str = ""
    oauth_timestamp: str = ""
    oauth_nonce: str = ""
    oauth_version: str = ""
    oauth_callback: str = ""
    lti_message_type: str = ""
    lti_version: str = ""
    resource_link_id: str = ""
    user_id: str | None = None
    roles: str | None = None
    resource_link_title: str | None = None
    lis_result_sourcedid: str | None = None
    lis_outcome_service_url: str | None = None
    custom_content_id: str | None = None

    @classmethod
    def from_form(
        cls, method: str, url: str, pairs: list[tuple[str, str]] | tuple[tuple[str, str], ...]
    ) -> "LaunchRequest":
        first: dict[str, str] = {}
        for name, value in pairs:
            first.setdefault(name, value)
        return cls(
            http_method=method.upper(),
            url=url,
            all_parameters=tuple(pairs),
            oauth_consumer_key=first.get("oauth_consumer_key", ""),
            oauth_signature=first.get("oauth_signature", ""),
            oauth_signature_method=first.get("oauth_signature_method", ""),
            oauth_timestamp=first.get("oauth_timestamp", ""),
            oauth_nonce=first.get("oauth_nonce", ""),
            oauth_version=first.get("oauth_version", ""),
            oauth_callback=first.get("oauth_callback", ""),
            lti_message_type=first.get("lti_message_type", ""),
            lti_version=first.get("lti_version", ""),
            resource_link_id=first.get("resource_link_id", ""),
            user_id=first.get("user_id"),
            roles=first.get("roles"),
            resource_link_title=first.get("resource_link_title"),
            lis_result_sourcedid=first.get("lis_result_sourcedid"),
            lis_outcome_service_url=first.get("lis_outcome_service_url"),
            custom_content_id=first.get("custom_content_id"),
        )


@dataclass(frozen=True)
class Session:
    """Proof of a verified launch, binding the user to the content and to
    the outcome routing data needed for grade passback."""

    token: str
    consumer_key: str
    user_id: str | None
    resource_link_id: str
    content_id: str
    result_sourcedid: str | None
    outcome_service_url: str | None
    issued_at: int
    ttl: int

    def expired(self, now: int) -> bool:
        return now > self.issued_at + self.ttl


def mint_session_token() -> str:
    """Opaque bearer token with 256 bits of entropy."""
    return secrets.token_urlsafe(32)


class SessionStore:
    """Live sessions by token; expired entries are never returned and are
    purged lazily."""

    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def issue(
        self,
        *,
        consumer_key: str,
        user_id: str | None,
        resource_link_id: str,
        content_id: str,
        result_sourcedid: str | None,
        outcome_service_url: str | None,
        now: int,
        ttl: int = DEFAULT_SESSION_TTL,
    ) -> Session:
        with self._lock:
            token = mint_session_token()
            while token in self._sessions:
                token = mint_session_token()
            session = Session(
                token=token,
                consumer_key=consumer_key,
                user_id=user_id,
                resource_link_id=resource_link_id,
                content_id=content_id,
                result_sourcedid=result_sourcedid,
                outcome_service_url=outcome_service_url,
                issued_at=now,
                ttl=ttl,
            )
            self._sessions[token] = session
            return session

    def get(self, token: str, now: int) -> Session | None:
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                return None
            if session.expired(now):
                del self._sessions[token]
                return None
            return session

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def resolve_content_id(req: LaunchRequest) -> str | None:
    """Target content: the ``custom_content_id`` parameter when present,
    else the trailing path segment of the launch URL."""
    if req.custom_content_id:
        return req.custom_content_id
    path = urlsplit(req.url).path
    segment = path.rstrip("/").rsplit("/", 1)[-1]
    return segment or None


class LaunchValidator:
    """Applies the launch checks against a consumer registry and nonce store,
    resolving content and issuing sessions on success."""

    def __init__(
        self,
        registry: ConsumerRegistry,
        nonce_store: NonceStore,
        content_exists: Callable[[str], bool],
        *,
        session_store: SessionStore | None = None,
        timestamp_window: int = DEFAULT_TIMESTAMP_WINDOW,
        session_ttl: int = DEFAULT_SESSION_TTL,
    ):
        self._registry = registry
        self._nonces = nonce_store
        self._content_exists = content_exists
        self.sessions = session_store if session_store is not None else SessionStore()
        self._window = timestamp_window
        self._ttl = session_ttl

    def validate(self, req: LaunchRequest, now: int | None = None) -> Session:
        """Run every check, then mint a session bound to the resolved content.

        Raises LaunchRejected carrying all failed checks. The nonce is
        consumed only when every earlier check passed, so garbage requests
        cannot burn nonces.
        """
        now = int(time.time()) if now is None else now
        reasons: list[str] = []

        if req.http_method != "POST":
            reasons.append(NOT_POST)
        if req.lti_message_type != LAUNCH_MESSAGE_TYPE:
            reasons.append(BAD_MESSAGE_TYPE)
        if req.lti_version != LAUNCH_LTI_VERSION:
            reasons.append(BAD_VERSION)
        if not req.resource_link_id:
            reasons.append(MISSING_RESOURCE_LINK)
        credential = self._registry.get(req.oauth_consumer_key)
        if credential is None or not credential.enabled:
            credential = None
            reasons.append(UNKNOWN_CONSUMER)
        if req.oauth_callback != EXPECTED_CALLBACK:
            reasons.append(BAD_CALLBACK)
        if req.oauth_version != EXPECTED_OAUTH_VERSION:
            reasons.append(BAD_OAUTH_VERSION)
        try:
            ts = int(req.oauth_timestamp)
        except ValueError:
            ts = None
        if ts is None or not check_timestamp(ts, now, self._window):
            reasons.append(STALE_TIMESTAMP)

        # Nonce: consume only when all prior checks passed; otherwise just
        # peek so the replay still shows up in the report.
        if not reasons and ts is not None:
            if not self._nonces.check_and_store(req.oauth_consumer_key, req.oauth_nonce, ts):
                reasons.append(REPLAYED_NONCE)
        elif self._nonces.seen(req.oauth_consumer_key, req.oauth_nonce):
            reasons.append(REPLAYED_NONCE)

        # Signature is checkable only with a known consumer's secret.
        if credential is not None:
            signable = SignableRequest.build(req.http_method, req.url, list(req.all_parameters))
            if req.oauth_signature_method != SIGNATURE_METHOD or not verify_signature(
                signable, req.oauth_signature, credential.shared_secret
            ):
                reasons.append(BAD_SIGNATURE)

        content_id = resolve_content_id(req)
        if content_id is None or not self._content_exists(content_id):
            reasons.append(UNKNOWN_CONTENT)

        if reasons:
            raise LaunchRejected(reasons)

        return self.sessions.issue(
            consumer_key=req.oauth_consumer_key,
            user_id=req.user_id,
            resource_link_id=req.resource_link_id,
            content_id=content_id,  # type: ignore[arg-type]
            result_sourcedid=req.lis_result_sourcedid,
            outcome_service_url=req.lis_outcome_service_url,
            now=now,
            ttl=self._ttl,
        )
