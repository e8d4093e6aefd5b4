from __future__ import annotations

import random
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microlti.launch import ConsumerCredential
from microlti.oauth1 import SignableRequest, body_hash, parse_authorization_header, verify_signature
from microlti.outcomes import (
    InvalidScore,
    MalformedOutcomeXml,
    MissingScore,
    MissingSourcedId,
    OutcomeRequest,
    OutcomeResponse,
    SignatureRejected,
    TransportFailure,
    UnsupportedOperation,
    build_outcome_response_xml,
    build_outcome_xml,
    format_score,
    parse_outcome_xml,
    send_outcome,
)

CRED = ConsumerCredential(consumer_key="sim-lms", shared_secret="s3cr3t")


def replace_result(score: float, message_id: str = "m1", sourced_id: str = "src-9") -> OutcomeRequest:
    return OutcomeRequest(
        operation="replaceResult", message_id=message_id, sourced_id=sourced_id, score=score
    )


# --- building ------------------------------------------------------------------

def test_replace_result_xml_carries_exact_score_text():
    xml = build_outcome_xml(replace_result(0.75))
    root = ET.fromstring(xml)
    texts = {el.tag.rsplit("}", 1)[-1]: el.text for el in root.iter()}
    assert texts["textString"] == "0.75"
    assert texts["language"] == "en"
    assert texts["imsx_version"] == "V1.0"
    assert texts["imsx_messageIdentifier"] == "m1"
    assert texts["sourcedId"] == "src-9"
    assert any(el.tag.endswith("replaceResultRequest") for el in root.iter())


def test_read_result_xml_has_no_result_element():
    xml = build_outcome_xml(OutcomeRequest("readResult", "m2", "src-9"))
    root = ET.fromstring(xml)
    locals_ = [el.tag.rsplit("}", 1)[-1] for el in root.iter()]
    assert "readResultRequest" in locals_
    assert "result" not in locals_
    assert "textString" not in locals_


def test_score_out_of_bounds_rejected():
    with pytest.raises(InvalidScore):
        build_outcome_xml(replace_result(1.2))
    with pytest.raises(InvalidScore):
        build_outcome_xml(replace_result(-0.01))
    with pytest.raises(InvalidScore):
        build_outcome_xml(replace_result(1.01))
    with pytest.raises(MissingScore):
        build_outcome_xml(OutcomeRequest("replaceResult", "m1", "src-9"))
    with pytest.raises(InvalidScore):
        build_outcome_xml(OutcomeRequest("readResult", "m1", "src-9", score=0.5))


def test_score_serialization_shortest_decimal():
    assert format_score(0.75) == "0.75"
    assert format_score(1.0) == "1"
    assert format_score(0.0) == "0"
    assert format_score(2 / 3) == "0.6667"
    assert format_score(0.5) == "0.5"


# --- parsing -------------------------------------------------------------------

def test_build_parse_round_trip_all_operations():
    requests = [
        replace_result(0.75),
        OutcomeRequest("readResult", "m2", "src-9"),
        OutcomeRequest("deleteResult", "m3", "src-10"),
    ]
    for request in requests:
        assert parse_outcome_xml(build_outcome_xml(request)) == request


@settings(max_examples=200)
@given(
    st.sampled_from(["replaceResult", "readResult", "deleteResult"]),
    st.text(alphabet="abcdef0123456789-", min_size=1, max_size=24),
    st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789:_-", min_size=1, max_size=24),
    st.integers(min_value=0, max_value=10_000),
)
def test_build_parse_round_trip_property(operation, message_id, sourced_id, numerator):
    score = numerator / 10_000 if operation == "replaceResult" else None
    request = OutcomeRequest(operation, message_id, sourced_id, score)
    assert parse_outcome_xml(build_outcome_xml(request)) == request


def test_unknown_operation_rejected():
    xml = build_outcome_xml(replace_result(0.5)).replace(b"replaceResult", b"unknown")
    with pytest.raises(UnsupportedOperation):
        parse_outcome_xml(xml)


def test_truncated_document_is_malformed():
    xml = build_outcome_xml(replace_result(0.5))
    with pytest.raises(MalformedOutcomeXml):
        parse_outcome_xml(xml[: len(xml) // 2])


def test_missing_sourcedid_detected():
    xml = build_outcome_xml(replace_result(0.5)).replace(b"sourcedId", b"sourcedXX")
    with pytest.raises(MissingSourcedId):
        parse_outcome_xml(xml)


def test_parse_ignores_unknown_siblings():
    xml = build_outcome_xml(replace_result(0.5)).replace(
        b"<resultRecord>", b"<futureExtension>x</futureExtension><resultRecord>"
    )
    assert parse_outcome_xml(xml) == replace_result(0.5)


def test_response_round_trip():
    response = OutcomeResponse(status="success", message_ref="m1", description="stored", score=0.25)
    parsed = parse_outcome_xml(build_outcome_response_xml(response, "readResult"))
    assert parsed == response
    failure = OutcomeResponse(status="failure", message_ref="m9", description="sourcedId not found")
    assert parse_outcome_xml(build_outcome_response_xml(failure, "replaceResult")) == failure


# --- sending ---------------------------------------------------------------------

def test_send_outcome_signs_body_and_parses_response():
    captured = {}

    def fake_post(url, headers, body):
        captured["url"] = url
        captured["headers"] = headers
        captured["body"] = body
        response = OutcomeResponse(status="success", message_ref="m1", description="ok")
        return 200, build_outcome_response_xml(response, "replaceResult")

    response = send_outcome("http://tc.example/outcomes", CRED, replace_result(0.75), http_post=fake_post)
    assert response.is_success
    assert captured["headers"]["Content-Type"] == "application/xml"

    oauth_params = parse_authorization_header(captured["headers"]["Authorization"])
    assert oauth_params["oauth_body_hash"] == body_hash(captured["body"])
    signature = oauth_params.pop("oauth_signature")
    signable = SignableRequest.build("POST", captured["url"], list(oauth_params.items()))
    assert verify_signature(signable, signature, CRED.shared_secret)


def test_send_outcome_maps_401_to_signature_rejected():
    def unauthorized(url, headers, body):
        return 401, b"signature mismatch"

    with pytest.raises(SignatureRejected):
        send_outcome("http://tc.example/outcomes", CRED, replace_result(0.5), http_post=unauthorized)


def test_send_outcome_unreachable_endpoint_is_transport_failure():
    # port 9 is unbound on localhost; the connection is refused immediately
    with pytest.raises(TransportFailure):
        send_outcome("http://127.0.0.1:9/outcomes", CRED, replace_result(0.5))


def test_send_outcome_malformed_response():
    def junk(url, headers, body):
        return 200, b"<not-pox/>"

    from microlti.outcomes import MalformedOutcomeResponse

    with pytest.raises(MalformedOutcomeResponse):
        send_outcome("http://tc.example/outcomes", CRED, replace_result(0.5), http_post=junk)


def test_emitted_scores_parse_back_within_tolerance():
    rng = random.Random(7)
    for _ in range(200):
        score = rng.random()
        xml = build_outcome_xml(replace_result(score))
        parsed = parse_outcome_xml(xml)
        assert parsed.score is not None
        assert 0.0 <= parsed.score <= 1.0
        assert abs(parsed.score - score) <= 1e-4
