"""Seed content and answer sets for the demo loop and the test suite."""

from __future__ import annotations

from .content import Explanation, MicroContent, Question

FIXTURE_CONTENT_ID = "mc-signing-101"


def sample_content(content_id: str = FIXTURE_CONTENT_ID) -> MicroContent:
    """A well-formed four-question unit; pairs with the answer sets below."""
    return MicroContent(
        id=content_id,
        title="Signing a request end to end",
        topic="request signing",
        authors=("Demo Author",),
        date="2024-05-06",
        tags=("oauth", "signing", "security"),
        introduction=(
            "Every call between the learning platform and this service is signed. "
            "This unit walks through what gets signed, how the key is shared, and "
            "why a request can never be replayed."
        ),
        explanation=Explanation(
            kind="video",
            uri="https://video.example/units/signing-101",
            duration=420,
            body=(
                "The sender encodes the parameters, sorts them, signs the result "
                "with the shared secret, and the receiver repeats the same steps "
                "to compare signatures."
            ),
        ),
        quiz=(
            Question(
                kind="multiple_choice_single",
                prompt="Who holds the shared secret?",
                options=(
                    "Every student in the course",
                    "Only the two servers that exchange requests",
                    "Anyone with the launch URL",
                ),
                correct=(1,),
                feedback="The secret never leaves the two servers.",
            ),
            Question(
                kind="multiple_choice_multi",
                prompt="Which parts of a request are covered by the signature?",
                options=(
                    "The HTTP method",
                    "The TCP port of the client",
                    "The request parameters",
                    "The server's log format",
                ),
                correct=(0, 2),
                feedback="Method, URL, and parameters are all bound into the base string.",
            ),
            Question(
                kind="short_answer",
                prompt="Name the single-use random value that blocks replays.",
                options=(),
                correct=("nonce",),
                feedback="A fresh one is minted for every signed request.",
            ),
            Question(
                kind="multiple_choice_single",
                prompt="A request arrives twice with identical parameters. What happens?",
                options=(
                    "The second one is rejected",
                    "Both are accepted",
                ),
                correct=(0,),
                feedback="Replay defense rejects the reused value.",
            ),
        ),
    )


def three_of_four_answers() -> list:
    """Answers the first three questions correctly, misses the last: 0.75."""
    return [1, [0, 2], "nonce", 1]


def all_correct_answers() -> list:
    return [1, [0, 2], "Nonce ", 0]
