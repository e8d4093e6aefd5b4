"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

from __future__ import annotations

import json
import random
import time
import uuid
from contextlib import contextmanager
from dataclasses import replace

import pytest

from microlti.content import (
    ContentValidationError,
    Explanation,
    FileContentStore,
    canonical_json,
    validate_content,
)
from microlti.fixtures import (
    FIXTURE_CONTENT_ID,
    all_correct_answers,
    sample_content,
    three_of_four_answers,
)
from microlti.launch import (
    BAD_CALLBACK,
    BAD_MESSAGE_TYPE,
    BAD_OAUTH_VERSION,
    BAD_SIGNATURE,
    BAD_VERSION,
    LaunchRejected,
    LaunchRequest,
    MISSING_RESOURCE_LINK,
    NOT_POST,
    REPLAYED_NONCE,
    STALE_TIMESTAMP,
    UNKNOWN_CONSUMER,
)
from microlti.oauth1 import (
    NonceStore,
    SignableRequest,
    body_hash,
    build_authorization_header,
    check_timestamp,
    sign_request,
    verify_signature,
)
from microlti.outcomes import (
    InvalidScore,
    OutcomeRequest,
    OutcomeResponse,
    build_outcome_xml,
    new_message_id,
    parse_outcome_xml,
)
from microlti.simulator import SimulatedUser

USER = SimulatedUser(user_id="student-1")


@contextmanager
def criterion(label: str, budget_seconds: float | None = None):
    started = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {label}")
        raise
    elapsed = time.monotonic() - started
    if budget_seconds is not None:
        assert elapsed < budget_seconds, f"{label}: took {elapsed:.2f}s, budget {budget_seconds}s"
    print(f"[PASS] {label} ({elapsed:.2f}s)")


# --- criterion 1 -----------------------------------------------------------------

def test_criterion_1_launch_check_conformance_matrix(stack):
    with criterion("criterion 1: launch conformance matrix (10 single violations + all-valid)", 1.0):
        sim, validator = stack.sim, stack.service.validator
        url = stack.launch_url

        def form_for(overrides=None, method="POST"):
            return sim.make_launch_form(USER, FIXTURE_CONTENT_ID, url, overrides=overrides, method=method)

        def expect(reason, form, method="POST"):
            request = LaunchRequest.from_form(method, url, list(form.items()))
            with pytest.raises(LaunchRejected) as excinfo:
                validator.validate(request)
            assert excinfo.value.reasons == [reason], (reason, excinfo.value.reasons)

        expect(NOT_POST, form_for(method="GET"), method="GET")
        expect(BAD_MESSAGE_TYPE, form_for({"lti_message_type": "ContentItemSelectionRequest"}))
        expect(BAD_VERSION, form_for({"lti_version": "LTI-2p0"}))
        expect(MISSING_RESOURCE_LINK, form_for({"resource_link_id": None}))
        expect(UNKNOWN_CONSUMER, form_for({"oauth_consumer_key": "ghost-lms"}))
        expect(BAD_CALLBACK, form_for({"oauth_callback": "http://evil"}))
        expect(BAD_OAUTH_VERSION, form_for({"oauth_version": "2.0"}))
        expect(STALE_TIMESTAMP, form_for({"oauth_timestamp": str(int(time.time()) - 1000)}))

        replayed = form_for()
        validator.validate(LaunchRequest.from_form("POST", url, list(replayed.items())))
        expect(REPLAYED_NONCE, replayed)

        corrupted = form_for()
        corrupted["oauth_signature"] = "AAAA" + corrupted["oauth_signature"][4:]
        expect(BAD_SIGNATURE, corrupted)

        valid = form_for()
        session = validator.validate(LaunchRequest.from_form("POST", url, list(valid.items())))
        assert session.content_id == FIXTURE_CONTENT_ID


# --- criterion 2 -----------------------------------------------------------------

def _random_request(rng: random.Random) -> tuple[SignableRequest, list[tuple[str, str]], str]:
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -._~%&=+é€"
    def text(lo=0, hi=12):
        return "".join(rng.choice(alphabet) for _ in range(rng.randint(lo, hi)))

    pairs = [(text(1), text()) for _ in range(rng.randint(1, 8))]
    pairs = [(k, v) for k, v in pairs if k != "oauth_signature"] or [("a", "1")]
    url = f"https://tp.example/launch/{rng.randint(0, 999)}"
    secret = text(1, 20)
    return SignableRequest.build("POST", url, pairs), pairs, secret


def _mutate(rng: random.Random, url: str, pairs: list[tuple[str, str]]) -> SignableRequest:
    choice = rng.randrange(5)
    mutated = list(pairs)
    if choice == 0:
        return SignableRequest.build("PUT", url, mutated)
    if choice == 1:
        return SignableRequest.build("POST", url + "x", mutated)
    if choice == 2:
        i = rng.randrange(len(mutated))
        mutated[i] = (mutated[i][0] + "x", mutated[i][1])
    elif choice == 3:
        i = rng.randrange(len(mutated))
        mutated[i] = (mutated[i][0], mutated[i][1] + "x")
    else:
        mutated.append(("injected", "pair"))
    return SignableRequest.build("POST", url, mutated)


def test_criterion_2_oauth_property_suite():
    with criterion("criterion 2: 1000 sign/verify round trips + 1000 mutations + replay + window edges", 10.0):
        rng = random.Random(0xC0FFEE)
        for _ in range(1000):
            req, _, secret = _random_request(rng)
            assert verify_signature(req, sign_request(req, secret), secret)

        for _ in range(1000):
            req, pairs, secret = _random_request(rng)
            signature = sign_request(req, secret)
            mutated = _mutate(rng, req.base_url, pairs)
            assert not verify_signature(mutated, signature, secret)

        nonces = NonceStore(window=300)
        assert nonces.check_and_store("lms", "n-replay", 5000) is True
        assert nonces.check_and_store("lms", "n-replay", 5000) is False

        now, window = 100_000, 300
        assert check_timestamp(now - window, now, window) is True
        assert check_timestamp(now - window - 1, now, window) is False
        assert check_timestamp(now + window, now, window) is True
        assert check_timestamp(now + window + 1, now, window) is False


# --- criterion 3 -----------------------------------------------------------------

def test_criterion_3_end_to_end_loop(stack):
    with criterion("criterion 3: launch -> fetch -> submit 3/4 -> gradebook 0.75, then 1.0 overwrite", 5.0):
        def run_loop(answers: list, expected: float) -> None:
            form = stack.sim.make_launch_form(USER, FIXTURE_CONTENT_ID, stack.launch_url)
            launched = stack.client.post(f"/lti/launch/{FIXTURE_CONTENT_ID}", data=form)
            assert launched.status_code == 302
            token = launched.headers["location"].split("token=", 1)[1]

            content = stack.client.get(f"/api/session/{token}/content")
            assert content.status_code == 200
            assert content.json()["id"] == FIXTURE_CONTENT_ID

            result = stack.client.post(f"/api/session/{token}/submit", json={"answers": answers})
            assert result.status_code == 200
            assert result.json()["score"] == expected
            assert result.json()["passback"]["status"] == "delivered"

            entry = stack.sim.gradebook_get(form["lis_result_sourcedid"])
            assert entry.score == expected
            assert abs(entry.score - expected) <= 1e-4

        run_loop(three_of_four_answers(), 0.75)
        run_loop(all_correct_answers(), 1.0)  # replaceResult overwrites the 0.75


# --- criterion 4 -----------------------------------------------------------------

def test_criterion_4_score_bound_enforcement(stack):
    with criterion("criterion 4: scores outside [0,1] rejected by builder and by the consumer endpoint"):
        for score in (-0.01, 1.01):
            with pytest.raises(InvalidScore):
                build_outcome_xml(
                    OutcomeRequest("replaceResult", new_message_id(), "src-1", score)
                )

        form = stack.sim.make_launch_form(USER, FIXTURE_CONTENT_ID, stack.launch_url)
        sourced_id = form["lis_result_sourcedid"]
        body = build_outcome_xml(
            OutcomeRequest("replaceResult", new_message_id(), sourced_id, 0.5)
        ).replace(b"0.5", b"1.5")
        status, payload = stack.sim.handle_outcome_request(
            "POST", stack.sim.outcome_service_url, _signed_headers(stack, body), body
        )
        assert status == 200
        response = parse_outcome_xml(payload)
        assert isinstance(response, OutcomeResponse) and not response.is_success
        assert stack.sim.gradebook_get(sourced_id).score is None


def _signed_headers(stack, body: bytes) -> dict[str, str]:
    params = [
        ("oauth_consumer_key", stack.credential.consumer_key),
        ("oauth_nonce", uuid.uuid4().hex),
        ("oauth_signature_method", "HMAC-SHA1"),
        ("oauth_timestamp", str(int(time.time()))),
        ("oauth_version", "1.0"),
        ("oauth_body_hash", body_hash(body)),
    ]
    signature = sign_request(
        SignableRequest.build("POST", stack.sim.outcome_service_url, params, body=body),
        stack.credential.shared_secret,
    )
    return {
        "Content-Type": "application/xml",
        "Authorization": build_authorization_header(params + [("oauth_signature", signature)]),
    }


# --- criterion 5 -----------------------------------------------------------------

def test_criterion_5_pox_round_trip_and_byte_mutation_fuzz(stack):
    with criterion("criterion 5: 1000 POX round trips + every single-byte mutation rejected with 401"):
        rng = random.Random(424242)
        operations = ("replaceResult", "readResult", "deleteResult")
        for _ in range(1000):
            operation = rng.choice(operations)
            request = OutcomeRequest(
                operation=operation,
                message_id=uuid.uuid4().hex,
                sourced_id=f"sb-{rng.randrange(10**9)}",
                score=rng.randint(0, 10_000) / 10_000 if operation == "replaceResult" else None,
            )
            assert parse_outcome_xml(build_outcome_xml(request)) == request

        form = stack.sim.make_launch_form(USER, FIXTURE_CONTENT_ID, stack.launch_url)
        body = build_outcome_xml(
            OutcomeRequest("replaceResult", new_message_id(), form["lis_result_sourcedid"], 0.75)
        )
        headers = _signed_headers(stack, body)
        for index in range(len(body)):
            mutated = bytearray(body)
            mutated[index] ^= 0x01
            status, _ = stack.sim.handle_outcome_request(
                "POST", stack.sim.outcome_service_url, headers, bytes(mutated)
            )
            assert status == 401, f"byte {index} mutation was not rejected"


# --- criterion 6 -----------------------------------------------------------------

def test_criterion_6_content_validation_rules(tmp_path):
    with criterion("criterion 6: duration rules fire exactly; store restart is byte-identical"):
        base = sample_content()

        missing_quiz = validate_content(replace(base, quiz=()))
        assert {rule for rule, _ in missing_quiz.errors} == {"missing-assessment-section"}

        video_600 = validate_content(
            replace(base, explanation=Explanation(kind="video", uri="https://v.example/x", duration=600))
        )
        assert video_600.errors == []
        assert {rule for rule, _ in video_600.warnings} == {"video-exceeds-recommended-duration"}

        video_1000 = validate_content(
            replace(base, explanation=Explanation(kind="video", uri="https://v.example/x", duration=1000))
        )
        assert {rule for rule, _ in video_1000.errors} == {"video-over-duration-cap"}

        store = FileContentStore(tmp_path / "store")
        store.create(base)
        persisted = store.get_bytes(base.id)
        reopened = FileContentStore(tmp_path / "store")
        assert reopened.get_bytes(base.id) == persisted == canonical_json(base.to_dict())

        with pytest.raises(ContentValidationError):
            store.create(replace(base, id="mc-broken", quiz=()))


# --- criterion 7 -----------------------------------------------------------------

def test_criterion_7_answer_key_confinement(stack):
    with criterion("criterion 7: zero answer-key bytes in any student-facing response"):
        responses: list[bytes] = []

        def record(response):
            responses.append(response.content)
            return response

        # the full student-facing corpus: launches (valid and failing), content
        # fetches, submissions, player assets, bad tokens
        form = stack.sim.make_launch_form(USER, FIXTURE_CONTENT_ID, stack.launch_url)
        launched = record(stack.client.post(f"/lti/launch/{FIXTURE_CONTENT_ID}", data=form))
        token = launched.headers["location"].split("token=", 1)[1]

        bad = dict(form)
        bad["oauth_signature"] = "AAAA"
        record(stack.client.post(f"/lti/launch/{FIXTURE_CONTENT_ID}", data=bad))
        record(stack.client.get(f"/api/session/{token}/content"))
        record(stack.client.post(f"/api/session/{token}/submit", json={"answers": three_of_four_answers()}))
        record(stack.client.post(f"/api/session/{token}/submit", json={"answers": all_correct_answers()}))
        record(stack.client.get("/api/session/forged/content"))
        record(stack.client.get("/player"))
        record(stack.client.get("/static/player.js"))

        assert len(responses) == 8
        blob = b"\n".join(responses)
        # canonical answer-key lists render as "correct":[...]; graded booleans do not
        assert b'"correct":[' not in blob
        # the fixture's accepted short-answer string must never be served
        assert b'"nonce"' not in blob

        for payload in responses:
            try:
                parsed = json.loads(payload)
            except (UnicodeDecodeError, json.JSONDecodeError):
                continue
            _assert_no_question_carries_keys(parsed)


def _assert_no_question_carries_keys(node) -> None:
    if isinstance(node, dict):
        if ("prompt" in node or "options" in node) and "correct" in node:
            raise AssertionError(f"question object leaked its answer key: {node}")
        for value in node.values():
            _assert_no_question_carries_keys(value)
    elif isinstance(node, list):
        for item in node:
            _assert_no_question_carries_keys(item)
