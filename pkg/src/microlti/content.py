"""Micro-content units: schema, validation rules, storage, search, and quiz scoring.

A unit is indivisible: a brief introduction, the development/explanation
of the topic, and a short assessment, plus lightweight metadata with a
bag-of-words tag set. Documents persist as canonical JSON so round trips
are bit-exact.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

EXPLANATION_KINDS = ("video", "interactive", "visual", "text")
QUESTION_KINDS = ("multiple_choice_single", "multiple_choice_multi", "short_answer")

# Duration rules: a unit must be consumable well inside one short session
# (hard cap), and videos hold attention best in the 6-9 minute range
# (soft lint above the top of that range).
VIDEO_MAX_SECONDS = 900
VIDEO_RECOMMENDED_MAX_SECONDS = 540
INTRODUCTION_LENGTH_LINT = 1000

_ID_RE = re.compile(r"^[A-Za-z0-9._~-]+$")
_TAG_RE = re.compile(r"^[^\sA-Z]+$")


class ContentError(Exception):
    """Base class for content-repo failures."""


class ContentValidationError(ContentError):
    def __init__(self, report: "ValidationReport"):
        super().__init__(f"validation failed: {report.errors}")
        self.report = report


class DuplicateContentId(ContentError):
    pass


class ContentNotFound(ContentError):
    pass


class VersionConflict(ContentError):
    pass


class EmptyQuery(ContentError):
    pass


@dataclass(frozen=True)
class Explanation:
    kind: str
    uri: str | None = None
    body: str | None = None
    duration: int | None = None

    def to_dict(self) -> dict:
        payload: dict = {"kind": self.kind}
        if self.uri is not None:
            payload["uri"] = self.uri
        if self.body is not None:
            payload["body"] = self.body
        if self.duration is not None:
            payload["duration"] = self.duration
        return payload

    @classmethod
    def from_dict(cls, data: Mapping) -> "Explanation":
        return cls(
            kind=_req_str(data, "kind"),
            uri=_opt_str(data, "uri"),
            body=_opt_str(data, "body"),
            duration=_opt_int(data, "duration"),
        )


@dataclass(frozen=True)
class Question:
    kind: str
    prompt: str
    options: tuple[str, ...] = ()
    correct: tuple = ()  # option indices, or accepted strings for short_answer
    feedback: str | None = None

    def to_dict(self) -> dict:
        payload: dict = {
            "kind": self.kind,
            "prompt": self.prompt,
            "options": list(self.options),
            "correct": list(self.correct),
        }
        if self.feedback is not None:
            payload["feedback"] = self.feedback
        return payload

    @classmethod
    def from_dict(cls, data: Mapping) -> "Question":
        options = data.get("options", [])
        correct = data.get("correct", [])
        if not isinstance(options, list) or not all(isinstance(o, str) for o in options):
            raise ValueError("question options must be a list of strings")
        if not isinstance(correct, list):
            raise ValueError("question correct must be a list")
        return cls(
            kind=_req_str(data, "kind"),
            prompt=_req_str(data, "prompt"),
            options=tuple(options),
            correct=tuple(correct),
            feedback=_opt_str(data, "feedback"),
        )


@dataclass(frozen=True)
class MicroContent:
    id: str
    title: str
    topic: str
    authors: tuple[str, ...]
    date: str
    tags: tuple[str, ...]
    introduction: str
    explanation: Explanation
    quiz: tuple[Question, ...]
    version: int = 1

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "topic": self.topic,
            "authors": list(self.authors),
            "date": self.date,
            "tags": list(self.tags),
            "introduction": self.introduction,
            "explanation": self.explanation.to_dict(),
            "quiz": [q.to_dict() for q in self.quiz],
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "MicroContent":
        authors = data.get("authors", [])
        tags = data.get("tags", [])
        quiz = data.get("quiz", [])
        if not isinstance(authors, list) or not all(isinstance(a, str) for a in authors):
            raise ValueError("authors must be a list of strings")
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise ValueError("tags must be a list of strings")
        if not isinstance(quiz, list):
            raise ValueError("quiz must be a list")
        explanation = data.get("explanation")
        if not isinstance(explanation, Mapping):
            raise ValueError("explanation must be an object")
        return cls(
            id=_req_str(data, "id"),
            title=_req_str(data, "title"),
            topic=_req_str(data, "topic"),
            authors=tuple(authors),
            date=_req_str(data, "date"),
            tags=tuple(tags),
            introduction=_req_str(data, "introduction"),
            explanation=Explanation.from_dict(explanation),
            quiz=tuple(Question.from_dict(q) for q in quiz),
            version=_opt_int(data, "version") or 1,
        )


@dataclass
class ValidationReport:
    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, rule_id: str, message: str) -> None:
        self.errors.append((rule_id, message))

    def warn(self, rule_id: str, message: str) -> None:
        self.warnings.append((rule_id, message))

    def to_dict(self) -> dict:
        return {
            "errors": [list(e) for e in self.errors],
            "warnings": [list(w) for w in self.warnings],
        }


def validate_content(doc: MicroContent) -> ValidationReport:
    """Check the indivisible three-section structure, metadata presence,
    question well-formedness, and duration rules. Errors block persistence;
    warnings are authoring lints."""
    report = ValidationReport()

    if not _ID_RE.match(doc.id):
        report.error("bad-id", f"id {doc.id!r} must be a nonempty URL-safe token")
    if not doc.title.strip():
        report.error("empty-title", "title must be nonempty")
    if not doc.topic.strip():
        report.error("empty-topic", "topic must be nonempty")
    try:
        date.fromisoformat(doc.date)
    except ValueError:
        report.error("bad-date", f"date {doc.date!r} is not an ISO-8601 date")
    for tag in doc.tags:
        if not _TAG_RE.match(tag):
            report.error("bad-tag", f"tag {tag!r} must be a nonempty lowercase token")
    if doc.version < 1:
        report.error("bad-version", "version must be a positive integer")

    if not doc.introduction.strip():
        report.error("missing-introduction-section", "a unit needs its brief introduction")
    elif len(doc.introduction) > INTRODUCTION_LENGTH_LINT:
        report.warn(
            "introduction-too-long",
            f"introduction is {len(doc.introduction)} characters; keep it perceivable at a glance",
        )

    _validate_explanation(doc.explanation, report)

    if not doc.quiz:
        report.error("missing-assessment-section", "a unit needs at least one quiz question")
    for index, question in enumerate(doc.quiz):
        _validate_question(index, question, report)

    if not doc.tags:
        report.warn("no-tags", "untagged content cannot be found by term search")

    return report


def _validate_explanation(exp: Explanation, report: ValidationReport) -> None:
    if exp.kind not in EXPLANATION_KINDS:
        report.error("bad-explanation-kind", f"explanation kind {exp.kind!r} is not one of {EXPLANATION_KINDS}")
    if exp.uri is None and not (exp.body or "").strip():
        report.error("missing-explanation-section", "explanation needs a uri or a text body")
    if exp.kind == "video":
        if not exp.uri:
            report.error("video-missing-uri", "video explanations must link their media")
        if exp.duration is None:
            report.error("video-missing-duration", "video explanations must declare a duration")
    if exp.duration is not None:
        if exp.duration <= 0:
            report.error("bad-duration", "duration must be positive seconds")
        elif exp.duration > VIDEO_MAX_SECONDS:
            report.error(
                "video-over-duration-cap",
                f"declared duration {exp.duration} s exceeds the 15-minute cap ({VIDEO_MAX_SECONDS} s)",
            )
        elif exp.duration > VIDEO_RECOMMENDED_MAX_SECONDS:
            report.warn(
                "video-exceeds-recommended-duration",
                f"declared duration {exp.duration} s; videos hold attention best at 6-9 minutes",
            )


def _validate_question(index: int, q: Question, report: ValidationReport) -> None:
    where = f"quiz[{index}]"
    if q.kind not in QUESTION_KINDS:
        report.error("bad-question-kind", f"{where}: kind {q.kind!r} is not one of {QUESTION_KINDS}")
        return
    if not q.prompt.strip():
        report.error("empty-question-prompt", f"{where}: prompt must be nonempty")
    if q.kind == "short_answer":
        if q.options:
            report.error("short-answer-with-options", f"{where}: short answers carry no options")
        accepted = [a for a in q.correct if isinstance(a, str) and a.strip()]
        if len(accepted) != len(q.correct) or not accepted:
            report.error(
                "missing-accepted-answers",
                f"{where}: short answers need at least one nonempty accepted string",
            )
        return
    if not q.options:
        report.error("question-without-options", f"{where}: choice questions need options")
    bad_indices = [c for c in q.correct if not isinstance(c, int) or isinstance(c, bool) or not 0 <= c < len(q.options)]
    if bad_indices:
        report.error("bad-correct-index", f"{where}: correct indices {bad_indices!r} out of range")
    if len(set(q.correct)) != len(q.correct):
        report.error("duplicate-correct-index", f"{where}: correct indices must be distinct")
    if q.kind == "multiple_choice_single" and len(q.correct) != 1:
        report.error("single-choice-correct-count", f"{where}: exactly one correct index required")
    if q.kind == "multiple_choice_multi" and not q.correct:
        report.error("question-without-correct-answer", f"{where}: mark at least one option correct")


def canonical_json(obj) -> bytes:
    """UTF-8, sorted keys, no insignificant whitespace; the one serialization
    used for storage and API bodies so round trips compare bit-exact."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=True).encode("utf-8")


def strip_answer_keys(doc_dict: dict) -> dict:
    """Student-facing view of a document: every question's ``correct`` field
    removed. Answer keys must never leave the server."""
    stripped = dict(doc_dict)
    stripped["quiz"] = [{k: v for k, v in q.items() if k != "correct"} for q in doc_dict.get("quiz", [])]
    return stripped


class ContentStore:
    """Document store with validation, optimistic versioning, and tag search.

    Subclasses supply the storage primitives; this base serializes writes
    per store while reads stay concurrent. The file-backed default keeps
    one canonical-JSON file per document plus an id->version index.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()

    # storage primitives -------------------------------------------------
    def _load(self, content_id: str) -> bytes | None:
        raise NotImplementedError

    def _store(self, content_id: str, payload: bytes, version: int) -> None:
        raise NotImplementedError

    def _all_ids(self) -> list[str]:
        raise NotImplementedError

    # operations ----------------------------------------------------------
    def create(self, doc: MicroContent) -> str:
        report = validate_content(doc)
        if not report.ok:
            raise ContentValidationError(report)
        stored = MicroContent.from_dict({**doc.to_dict(), "version": 1})
        with self._lock:
            if self._load(doc.id) is not None:
                raise DuplicateContentId(doc.id)
            self._store(doc.id, canonical_json(stored.to_dict()), 1)
        return doc.id

    def get(self, content_id: str) -> MicroContent:
        payload = self._load(content_id)
        if payload is None:
            raise ContentNotFound(content_id)
        return MicroContent.from_dict(json.loads(payload))

    def get_bytes(self, content_id: str) -> bytes:
        """Raw canonical JSON as persisted, for bit-exact round-trip checks."""
        payload = self._load(content_id)
        if payload is None:
            raise ContentNotFound(content_id)
        return payload

    def exists(self, content_id: str) -> bool:
        return self._load(content_id) is not None

    def update(self, content_id: str, doc: MicroContent, expected_version: int) -> int:
        report = validate_content(doc)
        if not report.ok:
            raise ContentValidationError(report)
        with self._lock:
            payload = self._load(content_id)
            if payload is None:
                raise ContentNotFound(content_id)
            current = json.loads(payload)["version"]
            if current != expected_version:
                raise VersionConflict(f"{content_id}: stored version {current}, expected {expected_version}")
            new_version = current + 1
            updated = MicroContent.from_dict({**doc.to_dict(), "id": content_id, "version": new_version})
            self._store(content_id, canonical_json(updated.to_dict()), new_version)
        return new_version

    def ids(self) -> list[str]:
        return sorted(self._all_ids())

    def documents(self) -> Iterator[MicroContent]:
        for content_id in self.ids():
            yield self.get(content_id)

    def search_by_tags(self, query: Iterable[str]) -> list[tuple[str, float]]:
        """Rank documents by Jaccard similarity between the query terms and
        each document's tag set; zero-score matches are omitted."""
        terms = {t.lower() for t in query if t.strip()}
        if not terms:
            raise EmptyQuery("search needs at least one term")
        hits: list[tuple[str, float]] = []
        for doc in self.documents():
            tags = set(doc.tags)
            union = terms | tags
            if not union:
                continue
            score = len(terms & tags) / len(union)
            if score > 0:
                hits.append((doc.id, score))
        hits.sort(key=lambda hit: (-hit[1], hit[0]))
        return hits


class MemoryContentStore(ContentStore):
    def __init__(self) -> None:
        super().__init__()
        self._docs: dict[str, bytes] = {}

    def _load(self, content_id: str) -> bytes | None:
        return self._docs.get(content_id)

    def _store(self, content_id: str, payload: bytes, version: int) -> None:
        self._docs[content_id] = payload

    def _all_ids(self) -> list[str]:
        return list(self._docs)


class FileContentStore(ContentStore):
    """One ``<id>.json`` canonical document per unit plus ``index.json``
    mapping id to version. Survives process restarts byte-identically."""

    def __init__(self, root: str | Path):
        super().__init__()
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._index_path = self._root / "index.json"
        if not self._index_path.exists():
            self._write_index({})

    def _read_index(self) -> dict[str, int]:
        return json.loads(self._index_path.read_text(encoding="utf-8"))

    def _write_index(self, index: dict[str, int]) -> None:
        self._index_path.write_text(
            json.dumps(index, sort_keys=True, indent=0) + "\n", encoding="utf-8"
        )

    def _doc_path(self, content_id: str) -> Path:
        return self._root / f"{content_id}.json"

    def _load(self, content_id: str) -> bytes | None:
        path = self._doc_path(content_id)
        if not path.exists():
            return None
        return path.read_bytes()

    def _store(self, content_id: str, payload: bytes, version: int) -> None:
        self._doc_path(content_id).write_bytes(payload)
        index = self._read_index()
        index[content_id] = version
        self._write_index(index)

    def _all_ids(self) -> list[str]:
        return list(self._read_index())


def export_ndjson(store: ContentStore) -> Iterator[bytes]:
    """Documents as a newline-delimited canonical-JSON stream."""
    for content_id in store.ids():
        yield store.get_bytes(content_id) + b"\n"


def import_ndjson(store: ContentStore, lines: Iterable[bytes | str]) -> list[str]:
    """Bulk-validate then load a newline-delimited JSON stream.

    All documents are validated before any is persisted; a single invalid
    document aborts the whole import.
    """
    docs: list[MicroContent] = []
    failures: list[tuple[str, ValidationReport]] = []
    for line_no, line in enumerate(lines, start=1):
        text = line.decode("utf-8") if isinstance(line, bytes) else line
        if not text.strip():
            continue
        try:
            doc = MicroContent.from_dict(json.loads(text))
        except (ValueError, TypeError) as exc:
            bad = ValidationReport()
            bad.error("unparseable-document", f"line {line_no}: {exc}")
            failures.append((f"line {line_no}", bad))
            continue
        report = validate_content(doc)
        if not report.ok:
            failures.append((doc.id, report))
        else:
            docs.append(doc)
    if failures:
        merged = ValidationReport()
        for doc_id, report in failures:
            for rule, message in report.errors:
                merged.error(rule, f"{doc_id}: {message}")
        raise ContentValidationError(merged)
    created = []
    for doc in docs:
        created.append(store.create(doc))
    return created


def score_quiz(doc: MicroContent, answers: Sequence | Mapping[int, object]) -> float:
    """Fraction of fully correct questions in [0, 1]; absent or malformed
    responses count as wrong."""
    graded = grade_quiz(doc, answers)
    if not graded:
        return 0.0
    return sum(1 for correct, _ in graded if correct) / len(graded)


def grade_quiz(doc: MicroContent, answers: Sequence | Mapping[int, object]) -> list[tuple[bool, str | None]]:
    """Per-question (correct, feedback) pairs in quiz order."""
    results = []
    for index, question in enumerate(doc.quiz):
        response = _response_for(answers, index)
        results.append((_grade_question(question, response), question.feedback))
    return results


def _response_for(answers, index: int):
    if isinstance(answers, Mapping):
        return answers.get(index)
    if isinstance(answers, Sequence) and not isinstance(answers, (str, bytes)):
        return answers[index] if index < len(answers) else None
    return None


def _grade_question(question: Question, response) -> bool:
    if response is None:
        return False
    if question.kind == "multiple_choice_single":
        if isinstance(response, bool) or not isinstance(response, int):
            return False
        return (response,) == question.correct
    if question.kind == "multiple_choice_multi":
        if not isinstance(response, (list, tuple, set)):
            return False
        picks = set()
        for item in response:
            if isinstance(item, bool) or not isinstance(item, int):
                return False
            picks.add(item)
        return picks == set(question.correct)
    if question.kind == "short_answer":
        if not isinstance(response, str):
            return False
        accepted = {a.strip().casefold() for a in question.correct if isinstance(a, str)}
        return response.strip().casefold() in accepted
    return False


def _req_str(data: Mapping, key: str) -> str:
    value = data.get(key)
    if not isinstance(value, str):
        raise ValueError(f"{key} must be a string")
    return value


def _opt_str(data: Mapping, key: str) -> str | None:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise ValueError(f"{key} must be a string when present")
    return value


def _opt_int(data: Mapping, key: str) -> int | None:
    value = data.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"{key} must be an integer when present")
    return value
