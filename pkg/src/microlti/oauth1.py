"""OAuth 1.0a signing and verification primitives.

Everything a signed launch or outcome POST needs: RFC 3986 percent
encoding, signature base strings, HMAC-SHA1 signatures, SHA-1 body
hashing for non-form bodies, and timestamp/nonce replay defense.
All output formats are byte-exact; both the provider and the simulated
consumer build on this module.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import re
import threading
from dataclasses import dataclass, field
from urllib.parse import quote, unquote, urlsplit, urlunsplit

SIGNATURE_METHOD = "HMAC-SHA1"

# Deployment-practice default; bounds the nonce store and caps replay exposure.
DEFAULT_TIMESTAMP_WINDOW = 300

_METHOD_RE = re.compile(r"^[A-Z]+$")
_DEFAULT_PORTS = {"http": 80, "https": 443}


def percent_encode(raw: str) -> str:
    """Percent-encode per RFC 3986: UTF-8 bytes, uppercase hex, only
    ``A-Z a-z 0-9 - . _ ~`` left bare."""
    return quote(raw, safe="", encoding="utf-8")


def percent_decode(encoded: str) -> str:
    return unquote(encoded, encoding="utf-8")


def normalize_base_url(url: str) -> str:
    """Lowercase scheme and host, drop default ports and any query/fragment."""
    parts = urlsplit(url)
    if not parts.scheme or parts.hostname is None:
        raise ValueError(f"base URL must be absolute: {url!r}")
    scheme = parts.scheme.lower()
    netloc = parts.hostname
    if parts.port is not None and parts.port != _DEFAULT_PORTS.get(scheme):
        netloc = f"{netloc}:{parts.port}"
    return urlunsplit((scheme, netloc, parts.path, "", ""))


@dataclass(frozen=True)
class SignableRequest:
    """A request reduced to the pieces OAuth signs.

    ``parameters`` is an ordered multiset of (name, value) pairs: query
    parameters, form-encoded body fields, and the ``oauth_*`` protocol
    fields, never including ``oauth_signature``. ``body`` carries the raw
    bytes of non-form payloads (bound into the signature via
    ``oauth_body_hash``, which the caller includes in ``parameters``).
    """

    http_method: str
    base_url: str
    parameters: tuple[tuple[str, str], ...]
    body: bytes = b""

    def __post_init__(self) -> None:
        if not _METHOD_RE.match(self.http_method):
            raise ValueError(f"http_method must be an uppercase token: {self.http_method!r}")
        if any(name == "oauth_signature" for name, _ in self.parameters):
            raise ValueError("parameters must not contain oauth_signature")

    @classmethod
    def build(
        cls,
        method: str,
        url: str,
        parameters: list[tuple[str, str]] | tuple[tuple[str, str], ...],
        body: bytes = b"",
    ) -> "SignableRequest":
        """Normalize a raw request: uppercase the method, fold query-string
        parameters into the parameter set, strip any oauth_signature pair."""
        parts = urlsplit(url)
        merged = [(k, v) for k, v in parse_form_body(parts.query)]
        merged.extend((k, v) for k, v in parameters if k != "oauth_signature")
        return cls(
            http_method=method.upper(),
            base_url=normalize_base_url(url),
            parameters=tuple(merged),
            body=body,
        )


def signature_base_string(req: SignableRequest) -> str:
    """``METHOD & enc(base_url) & enc(params)`` with each pair individually
    encoded and sorted by encoded name, then encoded value."""
    encoded = sorted((percent_encode(k), percent_encode(v)) for k, v in req.parameters)
    normalized = "&".join(f"{k}={v}" for k, v in encoded)
    return "&".join((req.http_method, percent_encode(req.base_url), percent_encode(normalized)))


def hmac_sha1_sign(base_string: str, consumer_secret: str, token_secret: str = "") -> str:
    """Base64 HMAC-SHA1 over the base string, keyed ``enc(cs)&enc(ts)``.

    LTI 1.1 has no token, so ``token_secret`` is normally empty.
    """
    key = f"{percent_encode(consumer_secret)}&{percent_encode(token_secret)}"
    digest = hmac.new(key.encode("utf-8"), base_string.encode("utf-8"), hashlib.sha1).digest()
    return base64.b64encode(digest).decode("ascii")


def sign_request(req: SignableRequest, consumer_secret: str, token_secret: str = "") -> str:
    return hmac_sha1_sign(signature_base_string(req), consumer_secret, token_secret)


def verify_signature(
    req: SignableRequest,
    presented_signature: str,
    consumer_secret: str,
    token_secret: str = "",
) -> bool:
    """True iff the recomputed signature matches; constant-time comparison."""
    expected = sign_request(req, consumer_secret, token_secret)
    return hmac.compare_digest(expected.encode("utf-8"), presented_signature.encode("utf-8"))


def body_hash(body: bytes) -> str:
    """Base64 SHA-1 of the raw body, carried as ``oauth_body_hash`` when the
    signed request has a non-form payload such as outcome XML."""
    return base64.b64encode(hashlib.sha1(body).digest()).decode("ascii")


def check_timestamp(ts: int, now: int, window: int = DEFAULT_TIMESTAMP_WINDOW) -> bool:
    """True iff ts is within the window on either side of now."""
    if window <= 0:
        raise ValueError("window must be positive")
    return abs(now - ts) <= window


class NonceStore:
    """Replay guard over (consumer_key, nonce) pairs.

    check_and_store is the one shared mutable operation in the signing
    layer and must stay atomic under concurrent request handlers. Records
    are retained for twice the timestamp window (anything older fails the
    timestamp check anyway) and evicted lazily on insert.
    """

    def __init__(self, window: int = DEFAULT_TIMESTAMP_WINDOW):
        if window <= 0:
            raise ValueError("window must be positive")
        self._retention = 2 * window
        self._seen: dict[tuple[str, str], int] = {}
        self._lock = threading.Lock()

    def check_and_store(self, consumer_key: str, nonce: str, ts: int) -> bool:
        """Record the nonce. False signals a replay; True accepts and stores."""
        with self._lock:
            horizon = ts - self._retention
            stale = [pair for pair, seen_ts in self._seen.items() if seen_ts < horizon]
            for pair in stale:
                del self._seen[pair]
            pair = (consumer_key, nonce)
            if pair in self._seen:
                return False
            self._seen[pair] = ts
            return True

    def seen(self, consumer_key: str, nonce: str) -> bool:
        """Non-consuming lookup, for reporting a replay without burning the nonce."""
        with self._lock:
            return (consumer_key, nonce) in self._seen

    def __len__(self) -> int:
        with self._lock:
            return len(self._seen)


def parse_form_body(encoded: str | bytes) -> list[tuple[str, str]]:
    """Decode an application/x-www-form-urlencoded payload into the lossless
    ordered multiset of (name, value) pairs."""
    if isinstance(encoded, bytes):
        encoded = encoded.decode("utf-8")
    pairs: list[tuple[str, str]] = []
    for chunk in encoded.split("&"):
        if not chunk:
            continue
        name, sep, value = chunk.partition("=")
        pairs.append((_unquote_form(name), _unquote_form(value) if sep else ""))
    return pairs


def encode_form_body(pairs: list[tuple[str, str]] | tuple[tuple[str, str], ...]) -> str:
    return "&".join(f"{quote(k, safe='')}={quote(v, safe='')}" for k, v in pairs)


def _unquote_form(text: str) -> str:
    return unquote(text.replace("+", " "), encoding="utf-8")


def build_authorization_header(parameters: list[tuple[str, str]], realm: str = "") -> str:
    """Render oauth_* parameters (signature included) as an ``OAuth ...``
    Authorization header value."""
    rendered = [f'realm="{percent_encode(realm)}"']
    rendered.extend(f'{percent_encode(k)}="{percent_encode(v)}"' for k, v in parameters)
    return "OAuth " + ", ".join(rendered)


def parse_authorization_header(value: str) -> dict[str, str]:
    """Parse an ``OAuth ...`` Authorization header into its parameter map,
    dropping the realm. Raises ValueError if the scheme is not OAuth."""
    if not value or not value.split(" ", 1)[0].lower() == "oauth":
        raise ValueError("not an OAuth authorization header")
    params: dict[str, str] = {}
    for part in value.split(" ", 1)[1].split(","):
        part = part.strip()
        if not part or "=" not in part:
            continue
        name, _, quoted = part.partition("=")
        name = percent_decode(name.strip())
        if name == "realm":
            continue
        params[name] = percent_decode(quoted.strip().strip('"'))
    return params
