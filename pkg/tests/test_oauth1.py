from __future__ import annotations

import base64
import hashlib
import random
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microlti.oauth1 import (
    NonceStore,
    SignableRequest,
    body_hash,
    build_authorization_header,
    check_timestamp,
    encode_form_body,
    hmac_sha1_sign,
    normalize_base_url,
    parse_authorization_header,
    parse_form_body,
    percent_encode,
    sign_request,
    signature_base_string,
    verify_signature,
)

UNRESERVED = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-._~"


# --- independent oracles -------------------------------------------------

def hmac_sha1_oracle(key: bytes, message: bytes) -> bytes:
    """HMAC from its definition (ipad/opad construction), independent of
    the hmac module used by the implementation."""
    if len(key) > 64:
        key = hashlib.sha1(key).digest()
    key = key.ljust(64, b"\x00")
    inner = hashlib.sha1(bytes(b ^ 0x36 for b in key) + message).digest()
    return hashlib.sha1(bytes(b ^ 0x5C for b in key) + inner).digest()


def reference_base_string(method: str, base_url: str, pairs: list[tuple[str, str]]) -> str:
    """Second, independently written base-string construction."""
    def enc(text: str) -> str:
        out = []
        for byte in text.encode("utf-8"):
            ch = chr(byte)
            if ch in UNRESERVED:
                out.append(ch)
            else:
                out.append("%%%02X" % byte)
        return "".join(out)

    encoded_pairs = [(enc(name), enc(value)) for name, value in pairs if name != "oauth_signature"]
    encoded_pairs.sort()
    parameter_string = "&".join(name + "=" + value for name, value in encoded_pairs)
    return method.upper() + "&" + enc(base_url) + "&" + enc(parameter_string)


# --- percent encoding -----------------------------------------------------

def test_percent_encode_passes_unreserved_through():
    assert percent_encode("abc") == "abc"
    assert percent_encode(UNRESERVED) == UNRESERVED


def test_percent_encode_space_and_utf8():
    assert percent_encode("a b") == "a%20b"
    # frozen from the reference encoder: UTF-8 C3 A9
    assert percent_encode("é") == "%C3%A9"


def test_percent_encode_matches_reference_bytes():
    sample = "ab é/%&=+€~._-"
    expected = "".join(
        chr(b) if chr(b) in UNRESERVED else "%%%02X" % b for b in sample.encode("utf-8")
    )
    assert percent_encode(sample) == expected


@given(st.text())
def test_percent_encode_alphabet(raw):
    encoded = percent_encode(raw)
    assert set(encoded) <= set(UNRESERVED + "%")
    rest = encoded
    while "%" in rest:
        at = rest.index("%")
        hex_digits = rest[at + 1 : at + 3]
        assert len(hex_digits) == 2 and hex_digits == hex_digits.upper()
        int(hex_digits, 16)
        rest = rest[at + 3 :]


@given(st.text())
def test_percent_encode_idempotent_only_on_unreserved(raw):
    once = percent_encode(raw)
    twice = percent_encode(once)
    if all(ch in UNRESERVED for ch in raw):
        assert twice == once == raw
    elif raw:
        assert twice != once


# --- base string ----------------------------------------------------------

def test_base_string_empty_parameters():
    req = SignableRequest.build("GET", "http://tp.example/launch", [])
    assert signature_base_string(req) == "GET&http%3A%2F%2Ftp.example%2Flaunch&"


def test_base_string_sorts_pairs():
    req = SignableRequest.build("GET", "http://tp.example/x", [("b", "2"), ("a", "1")])
    assert "a%3D1%26b%3D2" in signature_base_string(req)


def test_base_string_matches_reference_on_launch_parameters():
    pairs = [
        ("oauth_consumer_key", "moodle-campus"),
        ("oauth_nonce", "9f1d7a"),
        ("oauth_timestamp", "1700000000"),
        ("oauth_signature_method", "HMAC-SHA1"),
        ("oauth_version", "1.0"),
        ("oauth_callback", "about:blank"),
        ("lti_message_type", "basic-lti-launch-request"),
        ("lti_version", "LTI-1p0"),
        ("resource_link_id", "rl-42"),
        ("user_id", "u 1"),
        ("custom_content_id", "mc-é"),
        ("roles", "Learner"),
    ]
    url = "http://tp.example:80/lti/launch/mc-42"
    req = SignableRequest.build("POST", url, pairs)
    assert signature_base_string(req) == reference_base_string("POST", "http://tp.example/lti/launch/mc-42", pairs)


@given(
    st.lists(
        st.tuples(st.text(max_size=12).filter(lambda t: t != "oauth_signature"), st.text(max_size=12)),
        max_size=8,
    ),
    st.randoms(),
)
def test_base_string_ignores_insertion_order(pairs, rng):
    req = SignableRequest.build("POST", "https://tp.example/launch", pairs)
    shuffled = list(pairs)
    rng.shuffle(shuffled)
    req2 = SignableRequest.build("POST", "https://tp.example/launch", shuffled)
    assert signature_base_string(req) == signature_base_string(req2)


def test_base_url_normalization():
    assert normalize_base_url("HTTP://TP.Example:80/Launch?x=1#frag") == "http://tp.example/Launch"
    assert normalize_base_url("https://tp.example:443/a") == "https://tp.example/a"
    assert normalize_base_url("https://tp.example:8443/a") == "https://tp.example:8443/a"


def test_signable_request_rejects_bad_method_and_signature_param():
    with pytest.raises(ValueError):
        SignableRequest(http_method="get", base_url="http://x.example/", parameters=())
    with pytest.raises(ValueError):
        SignableRequest(
            http_method="GET", base_url="http://x.example/", parameters=(("oauth_signature", "x"),)
        )
    # build() strips the pair instead
    req = SignableRequest.build("get", "http://x.example/", [("oauth_signature", "x"), ("a", "1")])
    assert req.http_method == "GET"
    assert req.parameters == (("a", "1"),)


# --- HMAC-SHA1 ------------------------------------------------------------

def test_hmac_sha1_against_definition_oracle():
    cases = [
        ("", "secret", ""),
        ("base&string&here", "s3cr3t", ""),
        ("payload", "k1", "k2"),
        ("unicode é", "shäred", ""),
    ]
    for base_string, cs, ts in cases:
        key = f"{percent_encode(cs)}&{percent_encode(ts)}".encode()
        expected = base64.b64encode(hmac_sha1_oracle(key, base_string.encode())).decode()
        assert hmac_sha1_sign(base_string, cs, ts) == expected


def test_hmac_sha1_frozen_value_and_determinism():
    # frozen from the ipad/opad oracle above
    assert hmac_sha1_sign("", "secret", "") == "EBw0gHngam3BTx8kfPfNNSyKem4="
    assert hmac_sha1_sign("abc", "k") == hmac_sha1_sign("abc", "k")


def test_hmac_sha1_sensitive_to_one_byte():
    assert hmac_sha1_sign("messagea", "k") != hmac_sha1_sign("messageb", "k")


# --- sign / verify --------------------------------------------------------

def test_sign_then_verify_round_trip():
    req = SignableRequest.build("POST", "http://tp.example/launch", [("a", "1"), ("b", "2")])
    signature = sign_request(req, "secret")
    assert verify_signature(req, signature, "secret") is True
    assert verify_signature(req, signature, "wrong") is False


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(st.text(max_size=10).filter(lambda t: t != "oauth_signature"), st.text(max_size=10)),
        max_size=6,
    ),
    st.text(min_size=1, max_size=16),
)
def test_round_trip_property(pairs, secret):
    req = SignableRequest.build("POST", "https://tp.example/launch", pairs)
    assert verify_signature(req, sign_request(req, secret), secret)


@settings(max_examples=200)
@given(
    st.lists(
        st.tuples(
            st.text(min_size=1, max_size=8).filter(lambda t: t != "oauth_signature"),
            st.text(max_size=8),
        ),
        min_size=1,
        max_size=6,
    ),
    st.data(),
)
def test_any_parameter_mutation_breaks_verification(pairs, data):
    secret = "shared-secret"
    req = SignableRequest.build("POST", "https://tp.example/launch", pairs)
    signature = sign_request(req, secret)

    index = data.draw(st.integers(min_value=0, max_value=len(pairs) - 1))
    mutate_name = data.draw(st.booleans())
    name, value = pairs[index]
    mutated = list(pairs)
    if mutate_name:
        mutated[index] = (name + "x", value)
    else:
        mutated[index] = (name, value + "x")
    req2 = SignableRequest.build("POST", "https://tp.example/launch", mutated)
    assert not verify_signature(req2, signature, secret)


def test_method_and_url_mutations_break_verification():
    req = SignableRequest.build("POST", "http://tp.example/launch", [("a", "1")])
    signature = sign_request(req, "s")
    assert not verify_signature(
        SignableRequest.build("GET", "http://tp.example/launch", [("a", "1")]), signature, "s"
    )
    assert not verify_signature(
        SignableRequest.build("POST", "http://tp.example/other", [("a", "1")]), signature, "s"
    )


# --- body hash --------------------------------------------------------------

def test_body_hash_of_empty_body_matches_known_sha1():
    # SHA-1("") = da39a3ee5e6b4b0d3255bfef95601890afd80709
    expected = base64.b64encode(bytes.fromhex("da39a3ee5e6b4b0d3255bfef95601890afd80709")).decode()
    assert body_hash(b"") == expected == "2jmj7l5rSw0yVb/vlWAYkK/YBwk="


def test_body_hash_deterministic_and_sensitive():
    body = b"<xml>payload</xml>"
    assert body_hash(body) == body_hash(body)
    assert body_hash(body) != body_hash(b"<xml>payloae</xml>")


# --- timestamps -------------------------------------------------------------

def test_check_timestamp_window_edges():
    assert check_timestamp(1000, 1000, 300) is True
    assert check_timestamp(1000, 1300, 300) is True
    assert check_timestamp(1000, 1301, 300) is False
    assert check_timestamp(1300, 1000, 300) is True
    assert check_timestamp(1301, 1000, 300) is False


def test_check_timestamp_requires_positive_window():
    with pytest.raises(ValueError):
        check_timestamp(1, 1, 0)


# --- nonce store -------------------------------------------------------------

def test_nonce_first_use_accepted_then_replay():
    store = NonceStore(window=300)
    assert store.check_and_store("moodle1", "n1", 1000) is True
    assert store.check_and_store("moodle1", "n1", 1000) is False


def test_nonce_uniqueness_is_per_consumer_key():
    store = NonceStore(window=300)
    assert store.check_and_store("moodle1", "n1", 1000) is True
    assert store.check_and_store("moodle2", "n1", 1000) is True


def test_nonce_eviction_after_retention_horizon():
    store = NonceStore(window=300)
    store.check_and_store("k", "old", 1000)
    # 2x window later the old record may be evicted on insert
    store.check_and_store("k", "new", 1000 + 601)
    assert store.seen("k", "old") is False
    assert store.seen("k", "new") is True


def test_nonce_check_and_store_is_atomic_under_contention():
    store = NonceStore(window=300)
    outcomes: list[bool] = []
    barrier = threading.Barrier(16)

    def attempt():
        barrier.wait()
        outcomes.append(store.check_and_store("k", "shared-nonce", 2000))

    threads = [threading.Thread(target=attempt) for _ in range(16)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert outcomes.count(True) == 1
    assert outcomes.count(False) == 15


# --- form body and header codecs ---------------------------------------------

def test_form_body_round_trip_preserves_multiset():
    pairs = [("a", "1"), ("a", "1"), ("b", "x y+z"), ("empty", ""), ("é", "€")]
    encoded = encode_form_body(pairs)
    assert parse_form_body(encoded) == pairs


def test_authorization_header_round_trip():
    params = [("oauth_consumer_key", "k/1"), ("oauth_signature", "a+b=")]
    header = build_authorization_header(params, realm="tp")
    assert header.startswith("OAuth realm=")
    parsed = parse_authorization_header(header)
    assert parsed == {"oauth_consumer_key": "k/1", "oauth_signature": "a+b="}
    with pytest.raises(ValueError):
        parse_authorization_header("Bearer xyz")
