"""Query reformulation strategies over a pluggable LLM provider.

Four methods produce the reformulated query text q' consumed by retrieval:
  noqr       q' = q
  q2e        q' = q + "; "-joined expansion keywords
  query2doc  q' = q + " " + one generated answer passage
  eqr        q' = q + "[SEP]" + e_1 + ... + "[SEP]" + e_k, where each e_i is an
             information-rich elaboration of one inferred subtopic
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import httpx

from .corpus import Query
from .embedding import request_with_backoff

logger = logging.getLogger(__name__)

SEP = "[SEP]"

SCRIPTED_STUB = "scripted-stub"
REMOTE_HTTP = "remote-http"
REPLAY = "replay"


class QRMethod(str, Enum):
    NO_QR = "noqr"
    Q2E = "q2e"
    QUERY2DOC = "query2doc"
    EQR = "eqr"


class LLMError(RuntimeError):
    """Transport or provider failure while calling the LLM."""


class ReformulationError(RuntimeError):
    """The LLM answered, but no usable expansion could be parsed."""


@dataclass(frozen=True)
class Elaboration:
    subtopic_title: str
    body: str


@dataclass(frozen=True)
class ReformulatedQuery:
    original: Query
    method: QRMethod
    segments: tuple[str, ...]
    text: str
    elaborations: tuple[Elaboration, ...] = ()
    prompt: str | None = None
    raw_response: str | None = None


@dataclass
class LLMProviderConfig:
    provider_kind: str = SCRIPTED_STUB
    model_name: str = "stub"
    endpoint: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 1024
    api_key_env: str = "EQR_LLM_API_KEY"
    max_retries: int = 3
    fixtures_path: str | None = None


class LLMProvider:
    def complete(self, prompt: str, *, method: str | None = None, query_id: str | None = None) -> str:
        raise NotImplementedError


class ScriptedStubLLM(LLMProvider):
    """Deterministic fixture-driven provider.

    Fixtures are a JSON map {method: {query_id: raw_response}}; a "default" key
    per method acts as a catch-all.
    """

    def __init__(self, fixtures: dict[str, dict[str, str]]) -> None:
        self.fixtures = fixtures

    @classmethod
    def from_json(cls, path: str | Path) -> "ScriptedStubLLM":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_replay_log(cls, path: str | Path) -> "ScriptedStubLLM":
        """Rebuild a deterministic provider from a recorded replay log (last entry wins)."""
        fixtures: dict[str, dict[str, str]] = {}
        with Path(path).open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                fixtures.setdefault(entry["method"], {})[entry["query_id"]] = entry["raw_response"]
        return cls(fixtures)

    def complete(self, prompt: str, *, method: str | None = None, query_id: str | None = None) -> str:
        by_method = self.fixtures.get(method or "", {})
        raw = by_method.get(query_id or "", by_method.get("default"))
        if raw is None:
            raise LLMError(f"no stub fixture for method={method!r}, query_id={query_id!r}")
        return raw


class RemoteChatLLM(LLMProvider):
    """Chat-style HTTP provider: POST {"model", "messages", "temperature"} -> first choice text."""

    def __init__(self, config: LLMProviderConfig, client: httpx.Client | None = None) -> None:
        if not config.endpoint:
            raise ValueError("remote-http provider requires an endpoint")
        self.config = config
        self._client = client or httpx.Client(timeout=120.0)

    def complete(self, prompt: str, *, method: str | None = None, query_id: str | None = None) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.api_key_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = request_with_backoff(
                self._client,
                self.config.endpoint,
                payload,
                headers=headers,
                max_retries=self.config.max_retries,
            )
        except Exception as exc:
            raise LLMError(str(exc)) from exc
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise LLMError(f"malformed chat response: {exc}") from exc


def make_llm(config: LLMProviderConfig, client: httpx.Client | None = None) -> LLMProvider:
    if config.provider_kind == SCRIPTED_STUB:
        if not config.fixtures_path:
            raise ValueError("scripted-stub provider requires fixtures_path")
        return ScriptedStubLLM.from_json(config.fixtures_path)
    if config.provider_kind == REPLAY:
        if not config.fixtures_path:
            raise ValueError("replay provider requires fixtures_path (the replay log)")
        return ScriptedStubLLM.from_replay_log(config.fixtures_path)
    if config.provider_kind == REMOTE_HTTP:
        return RemoteChatLLM(config, client=client)
    raise ValueError(f"unknown provider kind: {config.provider_kind!r}")


def concat_with_sep(q: str, segments: list[str] | tuple[str, ...]) -> str:
    """q + "[SEP]" + s for each segment, byte-exact, no added whitespace."""
    return q + "".join(SEP + segment for segment in segments)


_LINE_PREFIX = re.compile(r"^\s*(?:[-*•]+|\d+[.)])\s*")
_TITLE_SEPARATORS = (" - ", " – ", " — ", ": ")
_MAX_TITLE_LEN = 80


def _split_titled_line(line: str) -> tuple[str, str] | None:
    best: tuple[int, str] | None = None
    for sep in _TITLE_SEPARATORS:
        pos = line.find(sep)
        if pos > 0 and (best is None or pos < best[0]):
            best = (pos, sep)
    if best is None:
        return None
    pos, sep = best
    title = line[:pos].strip()
    body = line[pos + len(sep) :].strip()
    if not title or not body or len(title) > _MAX_TITLE_LEN:
        return None
    return title, body


def parse_eqr_output(raw: str, k: int) -> list[Elaboration]:
    """Parse "Title - paragraph" lines into elaborations, order preserved.

    Lines without a title separator continue the previous paragraph (models
    sometimes hard-wrap). A count different from k is tolerated with a warning;
    zero parsed elaborations is an error.
    """
    elaborations: list[Elaboration] = []
    for raw_line in raw.splitlines():
        line = _LINE_PREFIX.sub("", raw_line.strip())
        if not line:
            continue
        split = _split_titled_line(line)
        if split is None:
            if elaborations:
                prev = elaborations[-1]
                elaborations[-1] = Elaboration(prev.subtopic_title, prev.body + " " + line)
            continue
        elaborations.append(Elaboration(*split))
    if not elaborations:
        raise ReformulationError("no parseable subtopic elaborations in LLM output")
    if len(elaborations) != k:
        logger.warning("requested %d elaborations, parsed %d; using what parsed", k, len(elaborations))
    return elaborations


def parse_q2e_output(raw: str) -> list[str]:
    parts = re.split(r"[;\n]+", raw)
    keywords = [_LINE_PREFIX.sub("", part.strip()).strip() for part in parts]
    return [kw for kw in keywords if kw]


def load_prompt(method: QRMethod, prompt_dir: str | Path | None = None) -> str:
    """Prompt template for a method, with {query} and {k} placeholders."""
    filename = f"{method.value}.txt"
    if prompt_dir is not None:
        return (Path(prompt_dir) / filename).read_text(encoding="utf-8")
    return (resources.files("nlrec") / "prompts" / filename).read_text(encoding="utf-8")


class Reformulator:
    """Turns a query into a ReformulatedQuery for one of the four methods.

    With a scripted stub this is a pure function of (query, method, fixture):
    repeated calls are byte-identical. `on_parse_failure` is one of
    "error" | "retry-once" | "noqr" (default retry-once, then error).
    """

    def __init__(
        self,
        llm: LLMProvider | None = None,
        *,
        k: int = 5,
        on_parse_failure: str = "retry-once",
        q2e_joiner: str = "; ",
        query2doc_joiner: str = " ",
        prompt_dir: str | Path | None = None,
        replay_log: str | Path | None = None,
    ) -> None:
        if k < 1:
            raise ValueError("k must be >= 1")
        if on_parse_failure not in ("error", "retry-once", "noqr"):
            raise ValueError(f"unknown on_parse_failure policy: {on_parse_failure!r}")
        self.llm = llm
        self.k = k
        self.on_parse_failure = on_parse_failure
        self.q2e_joiner = q2e_joiner
        self.query2doc_joiner = query2doc_joiner
        self.prompt_dir = prompt_dir
        self.replay_log = Path(replay_log) if replay_log else None

    def prompt_for(self, method: QRMethod, query: Query) -> str | None:
        if method is QRMethod.NO_QR:
            return None
        template = load_prompt(method, self.prompt_dir)
        return template.format(query=query.text, k=self.k)

    def _call_llm(self, prompt: str, method: QRMethod, query: Query) -> str:
        if self.llm is None:
            raise LLMError(f"method {method.value} requires an LLM provider")
        raw = self.llm.complete(prompt, method=method.value, query_id=query.query_id)
        if self.replay_log is not None:
            self.replay_log.parent.mkdir(parents=True, exist_ok=True)
            entry = {
                "timestamp": time.time(),
                "method": method.value,
                "query_id": query.query_id,
                "prompt": prompt,
                "raw_response": raw,
            }
            with self.replay_log.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
        return raw

    def reformulate(self, query: Query, method: QRMethod | str) -> ReformulatedQuery:
        method = QRMethod(method)
        if method is QRMethod.NO_QR:
            return ReformulatedQuery(original=query, method=method, segments=(), text=query.text)

        prompt = self.prompt_for(method, query)
        assert prompt is not None
        raw = self._call_llm(prompt, method, query)
        try:
            return self._assemble(query, method, prompt, raw)
        except ReformulationError as exc:
            if self.on_parse_failure == "error":
                raise
            if self.on_parse_failure == "retry-once":
                logger.warning("unparseable %s output for %s (%s); retrying once", method.value, query.query_id, exc)
                raw = self._call_llm(prompt, method, query)
                return self._assemble(query, method, prompt, raw)
            logger.warning("unparseable %s output for %s (%s); falling back to noqr", method.value, query.query_id, exc)
            return ReformulatedQuery(
                original=query,
                method=QRMethod.NO_QR,
                segments=(),
                text=query.text,
                prompt=prompt,
                raw_response=raw,
            )

    def _assemble(self, query: Query, method: QRMethod, prompt: str, raw: str) -> ReformulatedQuery:
        if method is QRMethod.Q2E:
            keywords = parse_q2e_output(raw)
            if not keywords:
                raise ReformulationError("no keywords in LLM output")
            text = self.q2e_joiner.join([query.text, *keywords])
            return ReformulatedQuery(
                original=query, method=method, segments=tuple(keywords), text=text,
                prompt=prompt, raw_response=raw,
            )
        if method is QRMethod.QUERY2DOC:
            passage = raw.strip()
            if not passage:
                raise ReformulationError("empty generated passage")
            text = query.text + self.query2doc_joiner + passage
            return ReformulatedQuery(
                original=query, method=method, segments=(passage,), text=text,
                prompt=prompt, raw_response=raw,
            )
        if method is QRMethod.EQR:
            elaborations = parse_eqr_output(raw, self.k)
            segments = tuple(e.body for e in elaborations)
            text = concat_with_sep(query.text, segments)
            return ReformulatedQuery(
                original=query, method=method, segments=segments, text=text,
                elaborations=tuple(elaborations), prompt=prompt, raw_response=raw,
            )
        raise ValueError(f"unhandled method: {method}")
