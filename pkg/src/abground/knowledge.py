"""Clinical definitions, candidate distillation, and prompt selection.

A definition store maps each abnormality class to its clinical definition.
Definitions are rendered into a fixed distillation template that asks a
language model for a concise visual description focused on the four
attributes (shape, intensity, density, location). N candidates are sampled
per class, cleaned, and persisted; a human (or the lexical-overlap auto
fallback) selects one, which lands in an append-only selection ledger.
Exporting the ledger over a complete class set yields the prompt
dictionary consumed by pair construction.

The completion client is pluggable: an HTTP client (OpenAI-style JSON
endpoint, configured via ABGROUND_LLM_ENDPOINT / ABGROUND_LLM_MODEL /
ABGROUND_LLM_API_KEY), a deterministic stub, or a record/replay client for
hermetic tests.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from ._data import load_json_asset
from .promptgen import Attribute, AttributeLexicon, shipped_lexicons

logger = logging.getLogger(__name__)

PROMPT_TEMPLATE = (
    'Here is the medical definition of {name}: "{definition}" '
    "Based on this definition, and focusing on shape, intensity, density, "
    "and location, provide a concise visual description that could guide "
    "image recognition."
)

SELECTED_BY_HUMAN = "human"
SELECTED_BY_AUTO = "auto"

_REFUSAL_MARKERS = (
    "i cannot", "i can't", "i am unable", "i'm unable", "as an ai",
    "i'm sorry", "i am sorry", "cannot assist",
)

_MIN_CANDIDATE_WORDS = 5


class TransportError(RuntimeError):
    """Completion endpoint unreachable after the retry budget."""

    def __init__(self, message: str, attempts: list[str]):
        super().__init__(message)
        self.attempts = attempts


class SelectionError(ValueError):
    """Bad selection index or incomplete ledger coverage."""


@dataclass(frozen=True)
class AbnormalityDefinition:
    class_name: str
    definition: str
    source: str = ""

    def __post_init__(self):
        if not self.class_name.strip():
            raise ValueError("class_name must be non-empty")
        if not self.definition.strip():
            raise ValueError(f"empty definition for {self.class_name!r}")


@dataclass(frozen=True)
class DistillationPrompt:
    class_name: str
    rendered_text: str


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.7
    top_p: float = 0.7
    repetition_penalty: float = 1.1
    max_tokens: int = 1024
    n: int = 5

    def as_dict(self) -> dict:
        return {"temperature": self.temperature, "top_p": self.top_p,
                "repetition_penalty": self.repetition_penalty,
                "max_tokens": self.max_tokens, "n": self.n}


@dataclass
class CandidatePool:
    class_name: str
    candidates: list[str]
    params: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self):
        if not 1 <= len(self.candidates) <= self.params.n:
            raise ValueError(
                f"pool for {self.class_name!r} has {len(self.candidates)} "
                f"candidates, expected 1..{self.params.n}"
            )


@dataclass(frozen=True)
class AttributePrompt:
    class_name: str
    description: str
    selected_index: int
    selected_by: str
    timestamp: str


class LLMClient(Protocol):
    def complete(self, prompt: str, params: GenerationParams) -> str: ...


class StubClient:
    """Deterministic client: replies come from a mapping or a callable.
    Per-prompt call counters are locked so concurrent generation stays
    deterministic per prompt."""

    def __init__(self, responses: dict[str, list[str]] | Callable[[str, int], str]):
        self._responses = responses
        self._calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str, params: GenerationParams) -> str:
        with self._lock:
            idx = self._calls.get(prompt, 0)
            self._calls[prompt] = idx + 1
        if callable(self._responses):
            return self._responses(prompt, idx)
        replies = self._responses[prompt]
        return replies[idx % len(replies)]


class ReplayClient:
    """Replays a recorded transcript: {prompt: [completion, ...]}."""

    def __init__(self, transcript_path: str | Path):
        self._transcript = json.loads(Path(transcript_path).read_text(encoding="utf-8"))
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str, params: GenerationParams) -> str:
        entries = self._transcript.get(prompt)
        if not entries:
            raise TransportError(f"no recorded completion for prompt: {prompt[:80]!r}",
                                 attempts=[])
        with self._lock:
            idx = self._cursor.get(prompt, 0)
            self._cursor[prompt] = idx + 1
        return entries[idx % len(entries)]


class HTTPClient:
    """Minimal JSON-over-HTTP completion client with bounded retries.

    Retries (3 attempts, exponential backoff from 1s) apply to transport
    failures and 5xx responses only; 4xx responses fail immediately.
    """

    def __init__(self, endpoint: str, model: str = "", api_key: str = "",
                 timeout: float = 60.0, max_attempts: int = 3,
                 backoff: float = 1.0, sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep

    def _request_body(self, prompt: str, params: GenerationParams) -> bytes:
        body = {
            "model": self.model,
            "prompt": prompt,
            "temperature": params.temperature,
            "top_p": params.top_p,
            "repetition_penalty": params.repetition_penalty,
            "max_tokens": params.max_tokens,
        }
        return json.dumps(body).encode("utf-8")

    @staticmethod
    def _extract_text(payload: dict) -> str:
        choices = payload.get("choices") or []
        if choices:
            first = choices[0]
            if isinstance(first.get("text"), str):
                return first["text"]
            message = first.get("message") or {}
            if isinstance(message.get("content"), str):
                return message["content"]
        if isinstance(payload.get("text"), str):
            return payload["text"]
        raise ValueError("completion response carries no text")

    def complete(self, prompt: str, params: GenerationParams) -> str:
        attempts: list[str] = []
        delay = self.backoff
        for attempt in range(1, self.max_attempts + 1):
            request = urllib.request.Request(
                self.endpoint,
                data=self._request_body(prompt, params),
                headers={"Content-Type": "application/json",
                         **({"Authorization": f"Bearer {self.api_key}"}
                            if self.api_key else {})},
                method="POST",
            )
            try:
                with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                    return self._extract_text(json.loads(resp.read().decode("utf-8")))
            except urllib.error.HTTPError as exc:
                attempts.append(f"attempt {attempt}: HTTP {exc.code}")
                if exc.code < 500:
                    raise TransportError(
                        f"endpoint rejected request (HTTP {exc.code})", attempts
                    ) from exc
            except (urllib.error.URLError, TimeoutError, ValueError,
                    json.JSONDecodeError) as exc:
                attempts.append(f"attempt {attempt}: {exc}")
            if attempt < self.max_attempts:
                self._sleep(delay)
                delay *= 2
        raise TransportError(
            f"endpoint unreachable after {self.max_attempts} attempts", attempts
        )


def load_definition_store(path: str | Path) -> list[AbnormalityDefinition]:
    """Load a definition store file: [{class_name, definition, source}]."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, list):
        raise ValueError(f"{path}: definition store must be a JSON array")
    defs = [AbnormalityDefinition(str(e["class_name"]), str(e["definition"]),
                                  str(e.get("source", ""))) for e in payload]
    names = [d.class_name for d in defs]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"duplicate class names in store: {', '.join(dupes)}")
    return defs


def shipped_definition_store() -> list[AbnormalityDefinition]:
    payload = load_json_asset("vindr_definitions.json")
    return [AbnormalityDefinition(e["class_name"], e["definition"],
                                  e.get("source", "")) for e in payload]


def render_prompt(definition: AbnormalityDefinition) -> DistillationPrompt:
    """Render the distillation template with the class and its definition."""
    return DistillationPrompt(
        class_name=definition.class_name,
        rendered_text=PROMPT_TEMPLATE.format(
            name=definition.class_name, definition=definition.definition
        ),
    )


_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\n?|```")
_EMPHASIS = re.compile(r"(\*\*|\*|__|_)(?=\S)(.+?)(?<=\S)\1", re.DOTALL)
_LEADING_LABEL = re.compile(
    r"^\s*(?:\d+[.)]\s*|[-*•]\s*|(?:candidate|description|answer|option)"
    r"\s*\d*\s*:\s*)+",
    re.IGNORECASE,
)


def clean_candidate(text: str) -> str | None:
    """Normalize one raw completion; None when nothing usable remains.

    Strips code fences, markdown emphasis, leading enumeration labels, and
    any trailing fragment after the last sentence terminator; collapses
    whitespace. Candidates shorter than five words or containing refusal
    phrasing are dropped.
    """
    text = _FENCE.sub(" ", text)
    text = _EMPHASIS.sub(r"\2", text)
    text = re.sub(r"\s+", " ", text).strip()
    text = _LEADING_LABEL.sub("", text).strip()
    if text.startswith('"') and text.endswith('"') and len(text) > 1:
        text = text[1:-1].strip()
    last_terminal = max(text.rfind("."), text.rfind("!"), text.rfind("?"))
    if 0 <= last_terminal < len(text) - 1:
        text = text[: last_terminal + 1]
    if not text:
        return None
    lowered = text.lower()
    if any(marker in lowered for marker in _REFUSAL_MARKERS):
        return None
    if len(text.split()) < _MIN_CANDIDATE_WORDS:
        return None
    return text


def generate_candidates(
    prompt: DistillationPrompt,
    client: LLMClient,
    params: GenerationParams = GenerationParams(),
    out_path: str | Path | None = None,
) -> CandidatePool:
    """Sample N completions, clean them, and persist the pool.

    Dropped completions shrink the pool with a warning. A transport error
    propagates before anything is written, so no partial pool is persisted.
    """
    raw = [client.complete(prompt.rendered_text, params) for _ in range(params.n)]
    candidates = []
    for i, completion in enumerate(raw):
        cleaned = clean_candidate(completion)
        if cleaned is None:
            logger.warning("dropping unusable candidate %d for %s",
                           i, prompt.class_name)
            continue
        candidates.append(cleaned)
    pool = CandidatePool(prompt.class_name, candidates, params)
    if out_path is not None:
        save_pool(pool, out_path)
    return pool


def generate_all_candidates(
    definitions: Sequence[AbnormalityDefinition],
    client: LLMClient,
    params: GenerationParams = GenerationParams(),
    out_dir: str | Path | None = None,
    pool_filename: Callable[[str], str] | None = None,
    max_in_flight: int = 4,
) -> tuple[dict[str, CandidatePool], dict[str, TransportError]]:
    """Generate pools for many classes with a bounded in-flight limit.

    Classes run concurrently (at most ``max_in_flight`` at a time); per
    class the N completions stay sequential. Failed classes are returned
    separately; their pools are not written, while completed pools are.
    """
    if pool_filename is None:
        def pool_filename(name: str) -> str:
            return f"{name}.json"

    def one(definition: AbnormalityDefinition) -> CandidatePool:
        prompt = render_prompt(definition)
        out_path = None
        if out_dir is not None:
            out_path = Path(out_dir) / pool_filename(definition.class_name)
        return generate_candidates(prompt, client, params, out_path)

    pools: dict[str, CandidatePool] = {}
    failures: dict[str, TransportError] = {}
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        futures = {d.class_name: pool.submit(one, d) for d in definitions}
        for name, future in futures.items():
            try:
                pools[name] = future.result()
            except TransportError as exc:
                failures[name] = exc
    return pools, failures


def save_pool(pool: CandidatePool, path: str | Path) -> None:
    payload = {"class_name": pool.class_name, "candidates": pool.candidates,
               "generation_params": pool.params.as_dict()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_pool(path: str | Path) -> CandidatePool:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    params = payload.get("generation_params", {})
    return CandidatePool(
        payload["class_name"], list(payload["candidates"]),
        GenerationParams(
            temperature=params.get("temperature", 0.7),
            top_p=params.get("top_p", 0.7),
            repetition_penalty=params.get("repetition_penalty", 1.1),
            max_tokens=params.get("max_tokens", 1024),
            n=params.get("n", 5),
        ),
    )


class SelectionLedger:
    """Append-only JSON-lines record of selections; the latest entry per
    class wins, earlier entries remain as audit history."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, prompt: AttributePrompt) -> None:
        entry = {
            "class_name": prompt.class_name,
            "description": prompt.description,
            "selected_index": prompt.selected_index,
            "selected_by": prompt.selected_by,
            "timestamp": prompt.timestamp,
        }
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry) + "\n")

    def entries(self) -> list[AttributePrompt]:
        if not self.path.exists():
            return []
        out = []
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                e = json.loads(line)
                out.append(AttributePrompt(
                    e["class_name"], e["description"], int(e["selected_index"]),
                    e["selected_by"], e["timestamp"]))
        return out

    def selections(self) -> dict[str, AttributePrompt]:
        latest: dict[str, AttributePrompt] = {}
        for entry in self.entries():
            latest[entry.class_name] = entry
        return latest


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def select_candidate(
    pool: CandidatePool,
    index: int,
    who: str = SELECTED_BY_HUMAN,
    ledger: SelectionLedger | None = None,
) -> AttributePrompt:
    """Record the chosen candidate; re-selection supersedes via a new entry."""
    if who not in (SELECTED_BY_HUMAN, SELECTED_BY_AUTO):
        raise ValueError(f"selected_by must be human or auto, got {who!r}")
    if not 0 <= index < len(pool.candidates):
        raise SelectionError(
            f"index {index} out of range for pool of {len(pool.candidates)}"
        )
    prompt = AttributePrompt(
        class_name=pool.class_name,
        description=pool.candidates[index],
        selected_index=index,
        selected_by=who,
        timestamp=_utc_now(),
    )
    if ledger is not None:
        ledger.append(prompt)
    return prompt


def auto_select_index(
    pool: CandidatePool,
    lexicons: dict[Attribute, AttributeLexicon] | None = None,
) -> int:
    """CI fallback: the candidate with the most attribute-lexicon hits wins
    (ties break toward the earliest candidate)."""
    if lexicons is None:
        lexicons = shipped_lexicons()
    import re as _re

    best_idx = 0
    best_hits = -1
    for idx, candidate in enumerate(pool.candidates):
        hits = 0
        lowered = candidate.lower()
        for lexicon in lexicons.values():
            for term in lexicon.terms:
                pattern = r"(?<!\w)" + _re.escape(term).replace(r"\-", r"[-\s]") + r"(?!\w)"
                if _re.search(pattern, lowered):
                    hits += 1
        if hits > best_hits:
            best_hits = hits
            best_idx = idx
    return best_idx


def export_prompt_dictionary(
    ledger: SelectionLedger,
    class_set: Iterable[str],
) -> dict:
    """Emit the versioned prompt dictionary for a class set.

    Raises SelectionError listing every class without a selection.
    """
    class_set = sorted(set(class_set))
    selections = ledger.selections()
    missing = [name for name in class_set if name not in selections]
    if missing:
        raise SelectionError(f"no selection for: {', '.join(missing)}")
    return {
        "version": 1,
        "prompts": {name: selections[name].description for name in class_set},
    }


def load_prompt_dictionary(path: str | Path) -> dict[str, str]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict) and "prompts" in payload:
        return dict(payload["prompts"])
    if isinstance(payload, dict):
        return {str(k): str(v) for k, v in payload.items()}
    raise ValueError(f"{path}: not a prompt dictionary")


def shipped_prompt_dictionary(which: str = "vindr") -> dict[str, str]:
    name = {"vindr": "vindr_descriptions.json",
            "padchest": "padchest_descriptions.json"}[which]
    return dict(load_json_asset(name)["prompts"])
