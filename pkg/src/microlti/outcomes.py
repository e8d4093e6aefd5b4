"""LIS Basic Outcomes POX messaging: build, parse, sign, and send.

replaceResult carries a score in [0, 1] to the consumer's gradebook;
readResult and deleteResult round out the operation set. Requests are
signed with an OAuth Authorization header whose ``oauth_body_hash``
binds the XML body into the signature.
"""

from __future__ import annotations

import time
import uuid
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from xml.etree.ElementTree import Element, SubElement

import httpx

from .oauth1 import (
    SIGNATURE_METHOD,
    SignableRequest,
    body_hash,
    build_authorization_header,
    sign_request,
)

OPERATIONS = ("replaceResult", "readResult", "deleteResult")
POX_NAMESPACE = "http://www.imsglobal.org/services/ltiv1p1/xsd/imsoms_v1p0"

SCORE_DECIMALS = 4


class OutcomeError(Exception):
    """Base class for outcome messaging failures."""


class InvalidScore(OutcomeError):
    pass


class MissingScore(OutcomeError):
    pass


class UnsupportedOperation(OutcomeError):
    pass


class MissingSourcedId(OutcomeError):
    pass


class MalformedOutcomeXml(OutcomeError):
    pass


class TransportFailure(OutcomeError):
    pass


class SignatureRejected(OutcomeError):
    pass


class MalformedOutcomeResponse(OutcomeError):
    pass


@dataclass(frozen=True)
class OutcomeRequest:
    operation: str
    message_id: str
    sourced_id: str
    score: float | None = None

    def validate(self) -> None:
        if self.operation not in OPERATIONS:
            raise UnsupportedOperation(self.operation)
        if self.operation == "replaceResult":
            if self.score is None:
                raise MissingScore("replaceResult requires a score")
            if not 0.0 <= self.score <= 1.0:
                raise InvalidScore(f"score {self.score} outside [0, 1]")
        elif self.score is not None:
            raise InvalidScore(f"{self.operation} carries no score")


@dataclass(frozen=True)
class OutcomeResponse:
    status: str  # "success" | "failure"
    message_ref: str
    description: str = ""
    score: float | None = None

    @property
    def is_success(self) -> bool:
        return self.status == "success"


def format_score(score: float) -> str:
    """Shortest decimal with at most four fractional digits, no exponent."""
    text = f"{score:.{SCORE_DECIMALS}f}".rstrip("0").rstrip(".")
    return text or "0"


def new_message_id() -> str:
    return str(uuid.uuid4())


def build_outcome_xml(req: OutcomeRequest) -> bytes:
    """UTF-8 ``imsx_POXEnvelopeRequest`` for the given operation."""
    req.validate()
    root = Element("imsx_POXEnvelopeRequest", {"xmlns": POX_NAMESPACE})
    header_info = SubElement(SubElement(root, "imsx_POXHeader"), "imsx_POXRequestHeaderInfo")
    SubElement(header_info, "imsx_version").text = "V1.0"
    SubElement(header_info, "imsx_messageIdentifier").text = req.message_id
    body = SubElement(root, "imsx_POXBody")
    operation_el = SubElement(body, f"{req.operation}Request")
    record = SubElement(operation_el, "resultRecord")
    SubElement(SubElement(record, "sourcedGUID"), "sourcedId").text = req.sourced_id
    if req.operation == "replaceResult":
        score_el = SubElement(SubElement(record, "result"), "resultScore")
        SubElement(score_el, "language").text = "en"
        SubElement(score_el, "textString").text = format_score(req.score)  # type: ignore[arg-type]
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def build_outcome_response_xml(resp: OutcomeResponse, operation: str) -> bytes:
    """UTF-8 ``imsx_POXEnvelopeResponse`` echoing the request's message id."""
    root = Element("imsx_POXEnvelopeResponse", {"xmlns": POX_NAMESPACE})
    header_info = SubElement(SubElement(root, "imsx_POXHeader"), "imsx_POXResponseHeaderInfo")
    SubElement(header_info, "imsx_version").text = "V1.0"
    SubElement(header_info, "imsx_messageIdentifier").text = new_message_id()
    status = SubElement(header_info, "imsx_statusInfo")
    SubElement(status, "imsx_codeMajor").text = resp.status
    SubElement(status, "imsx_severity").text = "status"
    SubElement(status, "imsx_description").text = resp.description
    SubElement(status, "imsx_messageRefIdentifier").text = resp.message_ref
    SubElement(status, "imsx_operationRefIdentifier").text = operation
    body = SubElement(root, "imsx_POXBody")
    operation_el = SubElement(body, f"{operation}Response")
    if operation == "readResult" and resp.score is not None:
        score_el = SubElement(SubElement(operation_el, "result"), "resultScore")
        SubElement(score_el, "language").text = "en"
        SubElement(score_el, "textString").text = format_score(resp.score)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def parse_outcome_xml(data: bytes) -> OutcomeRequest | OutcomeResponse:
    """Inverse of the builders on well-formed messages. Unknown sibling
    elements are ignored; namespaced and bare element names both parse."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedOutcomeXml(str(exc)) from exc
    kind = _local(root.tag)
    if kind == "imsx_POXEnvelopeRequest":
        return _parse_request(root)
    if kind == "imsx_POXEnvelopeResponse":
        return _parse_response(root)
    raise MalformedOutcomeXml(f"unexpected envelope element {kind!r}")


def _parse_request(root: Element) -> OutcomeRequest:
    message_id = _find_text(root, "imsx_messageIdentifier") or ""
    operation_el = _body_operation(root)
    operation = _local(operation_el.tag)
    if not operation.endswith("Request") or operation[: -len("Request")] not in OPERATIONS:
        raise UnsupportedOperation(operation)
    operation = operation[: -len("Request")]
    sourced_id = _find_text(operation_el, "sourcedId")
    if sourced_id is None:
        raise MissingSourcedId(f"{operation} request names no sourcedId")
    score: float | None = None
    score_text = _find_text(operation_el, "textString")
    if score_text is not None:
        try:
            score = float(score_text)
        except ValueError as exc:
            raise MalformedOutcomeXml(f"unparseable score {score_text!r}") from exc
    return OutcomeRequest(operation=operation, message_id=message_id, sourced_id=sourced_id, score=score)


def _parse_response(root: Element) -> OutcomeResponse:
    status = _find_text(root, "imsx_codeMajor") or ""
    if status not in ("success", "failure"):
        raise MalformedOutcomeXml(f"unexpected imsx_codeMajor {status!r}")
    score: float | None = None
    score_text = _find_text(root, "textString")
    if score_text:
        try:
            score = float(score_text)
        except ValueError as exc:
            raise MalformedOutcomeXml(f"unparseable score {score_text!r}") from exc
    return OutcomeResponse(
        status=status,
        message_ref=_find_text(root, "imsx_messageRefIdentifier") or "",
        description=_find_text(root, "imsx_description") or "",
        score=score,
    )


def _body_operation(root: Element) -> Element:
    for child in root.iter():
        if _local(child.tag) == "imsx_POXBody":
            for op in child:
                return op
    raise MalformedOutcomeXml("no imsx_POXBody operation element")


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _find_text(root: Element, local_name: str) -> str | None:
    for el in root.iter():
        if _local(el.tag) == local_name:
            return el.text or ""
    return None


def _default_http_post(url: str, headers: dict[str, str], body: bytes) -> tuple[int, bytes]:
    try:
        response = httpx.post(url, content=body, headers=headers, timeout=10.0)
    except httpx.HTTPError as exc:
        raise TransportFailure(str(exc)) from exc
    return response.status_code, response.content


def send_outcome(
    endpoint: str,
    cred,
    req: OutcomeRequest,
    *,
    http_post=None,
    now: int | None = None,
) -> OutcomeResponse:
    """POST a signed outcome request and return the parsed response.

    The body travels as ``application/xml`` with an OAuth Authorization
    header carrying ``oauth_body_hash`` over the exact bytes sent.
    At-most-once: ambiguous failures raise and are never retried here.
    A response with failure status is still returned to the caller, which
    decides how to surface it.

    ``cred`` is any object with ``consumer_key`` and ``shared_secret``.
    ``http_post(url, headers, body) -> (status, bytes)`` is injectable so
    tests can route to an in-process consumer.
    """
    body = build_outcome_xml(req)
    params = [
        ("oauth_consumer_key", cred.consumer_key),
        ("oauth_nonce", uuid.uuid4().hex),
        ("oauth_signature_method", SIGNATURE_METHOD),
        ("oauth_timestamp", str(int(time.time()) if now is None else now)),
        ("oauth_version", "1.0"),
        ("oauth_body_hash", body_hash(body)),
    ]
    signature = sign_request(SignableRequest.build("POST", endpoint, params, body=body), cred.shared_secret)
    headers = {
        "Content-Type": "application/xml",
        "Authorization": build_authorization_header(params + [("oauth_signature", signature)]),
    }
    post = http_post or _default_http_post
    status_code, response_body = post(endpoint, headers, body)
    if status_code == 401:
        raise SignatureRejected(f"consumer rejected the signature: {response_body[:200]!r}")
    if not 200 <= status_code < 300:
        raise TransportFailure(f"outcome endpoint returned HTTP {status_code}")
    try:
        parsed = parse_outcome_xml(response_body)
    except OutcomeError as exc:
        raise MalformedOutcomeResponse(str(exc)) from exc
    if not isinstance(parsed, OutcomeResponse):
        raise MalformedOutcomeResponse("expected a response envelope")
    return parsed
