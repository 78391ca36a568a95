"""Training-pair construction in both wire formats, plus attribute masking.

Two wire formats exist. The location-token format writes each box as four
``<loc_K>`` symbols with K on the [0, 1000] grid; the JSON format asks for
``bbox_2d`` arrays on the same grid. Base prompts carry only the class
name; knowledge-enhanced prompts append the selected visual description
(
``..., which means {description}.`` for location tokens, a trailing
``Note: {description}`` line for JSON). Answers list one line/object per
fused box in the dataset module's canonical order.

The masking engine removes every term of one visual attribute
(shape / intensity / density / location) from a description:
case-insensitive, word-boundary matches, longest term first, hyphens in a
term matching hyphen or whitespace, followed by a whitespace/punctuation
normalization pass. Removal repeats until no term of the attribute
remains, so masking is idempotent.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from ._data import load_json_asset
from .dataset import GroundingInstance
from .geometry import QuantizedBox, quantize


class WireFormat(str, Enum):
    LOC_TOKEN = "loc_token"
    JSON_BOX = "json_box"


class Attribute(str, Enum):
    SHAPE = "shape"
    INTENSITY = "intensity"
    DENSITY = "density"
    LOCATION = "location"


LOC_PROMPT_BASE = "Locate disease {name}."
LOC_PROMPT_WITH_KNOWLEDGE = "Locate disease {name}, which means {description}."
JSON_PROMPT_BASE = (
    "Return bounding boxes of '{name}' areas as JSON format:\n"
    '[{{"bbox_2d": [x1, y1, x2, y2], "label": "label"}}, ...]'
)
JSON_PROMPT_WITH_KNOWLEDGE = JSON_PROMPT_BASE + "\nNote: {description}"


class CoverageError(ValueError):
    """The prompt dictionary is missing classes required by a split."""


@dataclass(frozen=True)
class AttributeLexicon:
    attribute: Attribute
    terms: frozenset[str]

    def __post_init__(self):
        if not self.terms:
            raise ValueError(f"empty lexicon for {self.attribute.value}")


@dataclass(frozen=True)
class TrainingPair:
    prompt: str
    answer: str
    format: WireFormat
    class_name: str
    image_id: str
    boxes: tuple[QuantizedBox, ...]


def shipped_lexicons() -> dict[Attribute, AttributeLexicon]:
    """The bundled attribute term sets used for masking ablations."""
    raw = load_json_asset("attribute_lexicons.json")["attributes"]
    return {
        Attribute(name): AttributeLexicon(Attribute(name), frozenset(terms))
        for name, terms in raw.items()
    }


def _term_pattern(term: str) -> str:
    # hyphens in a term match hyphen or whitespace; spaces match any run
    parts = re.split(r"[-\s]+", term.strip())
    return r"[-\s]+".join(re.escape(p) for p in parts)


def _lexicon_regex(lexicon: AttributeLexicon) -> re.Pattern:
    alternatives = sorted(lexicon.terms, key=len, reverse=True)
    body = "|".join(_term_pattern(t) for t in alternatives)
    return re.compile(rf"(?<!\w)(?:{body})(?!\w)", re.IGNORECASE)


_REGEX_CACHE: dict[frozenset[str], re.Pattern] = {}


def _compiled(lexicon: AttributeLexicon) -> re.Pattern:
    pattern = _REGEX_CACHE.get(lexicon.terms)
    if pattern is None:
        pattern = _lexicon_regex(lexicon)
        _REGEX_CACHE[lexicon.terms] = pattern
    return pattern


def _tidy(text: str) -> str:
    text = re.sub(r"\s+", " ", text)
    text = re.sub(r"(?:^|(?<=\s))-+(?=\s|$)", " ", text)  # orphan hyphens
    text = re.sub(r"(?<=\w)-+(?=\s|$)", "", text)         # dangling "word- "
    text = re.sub(r"\s+([,.;:!?])", r"\1", text)          # no space before punctuation
    text = re.sub(r"(?:[,.;:!?]\s*)+([,.;:!?])", r"\1", text)  # collapse punct runs
    text = re.sub(r"^[\s,.;:!?-]+", "", text)
    return re.sub(r"\s+", " ", text).strip()


def mask_attribute(
    description: str,
    attribute: Attribute | str,
    lexicons: Mapping[Attribute, AttributeLexicon] | None = None,
) -> str:
    """Remove every term of one attribute's lexicon from a description.

    Terms of other attributes are untouched. Raises ValueError for an
    unknown attribute name.
    """
    if not description:
        raise ValueError("description must be non-empty")
    attribute = Attribute(attribute)
    if lexicons is None:
        lexicons = shipped_lexicons()
    pattern = _compiled(lexicons[attribute])

    text = description
    while True:
        stripped = pattern.sub(" ", text)
        if stripped == text:
            break
        text = stripped
    return _tidy(text)


def _strip_final_period(description: str) -> str:
    return description[:-1] if description.endswith(".") else description


def render_prompt_text(
    class_name: str,
    fmt: WireFormat,
    description: str | None = None,
) -> str:
    if fmt is WireFormat.LOC_TOKEN:
        if description is None:
            return LOC_PROMPT_BASE.format(name=class_name)
        return LOC_PROMPT_WITH_KNOWLEDGE.format(
            name=class_name, description=_strip_final_period(description)
        )
    if description is None:
        return JSON_PROMPT_BASE.format(name=class_name)
    return JSON_PROMPT_WITH_KNOWLEDGE.format(name=class_name, description=description)


def render_answer_text(
    class_name: str,
    qboxes: Iterable[QuantizedBox],
    fmt: WireFormat,
) -> str:
    qboxes = list(qboxes)
    if fmt is WireFormat.LOC_TOKEN:
        return "\n".join(
            f"{class_name} <loc_{q.qx1}><loc_{q.qy1}><loc_{q.qx2}><loc_{q.qy2}>"
            for q in qboxes
        )
    return json.dumps(
        [{"bbox_2d": list(q.components()), "label": class_name} for q in qboxes]
    )


def build_pair(
    instance: GroundingInstance,
    description: str | None,
    fmt: WireFormat,
) -> TrainingPair:
    """Build one prompt/answer pair for an instance.

    ``description`` is the selected visual description (or None for the
    base, knowledge-free variant). Boxes are quantized against the
    instance dims and emitted in stored order.
    """
    if getattr(description, "description", None) is not None:
        description = description.description  # accept an AttributePrompt
    qboxes = tuple(quantize(box, instance.dims) for box in instance.fused_boxes)
    return TrainingPair(
        prompt=render_prompt_text(instance.class_name, fmt, description),
        answer=render_answer_text(instance.class_name, qboxes, fmt),
        format=fmt,
        class_name=instance.class_name,
        image_id=instance.image_id,
        boxes=qboxes,
    )


def build_eval_set(
    instances: Iterable[GroundingInstance],
    dictionary: Mapping[str, str] | None,
    fmt: WireFormat,
    masked_attribute: Attribute | str | None = None,
    lexicons: Mapping[Attribute, AttributeLexicon] | None = None,
) -> list[TrainingPair]:
    """Build one pair per instance; dictionary=None builds base pairs.

    With ``masked_attribute`` set, every description passes through
    mask_attribute first. Raises CoverageError naming uncovered classes.
    """
    instances = list(instances)
    if dictionary is not None:
        uncovered = sorted({i.class_name for i in instances} - set(dictionary))
        if uncovered:
            raise CoverageError(
                f"prompt dictionary missing classes: {', '.join(uncovered)}"
            )

    masked_cache: dict[str, str] = {}
    pairs = []
    for inst in instances:
        description = None
        if dictionary is not None:
            description = dictionary[inst.class_name]
            if masked_attribute is not None:
                if inst.class_name not in masked_cache:
                    masked_cache[inst.class_name] = mask_attribute(
                        description, masked_attribute, lexicons
                    )
                description = masked_cache[inst.class_name]
        pairs.append(build_pair(inst, description, fmt))
    return pairs


def write_pairs_jsonl(pairs: Iterable[TrainingPair], path: str | Path) -> int:
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps({
                "prompt": pair.prompt,
                "answer": pair.answer,
                "format": pair.format.value,
                "image_id": pair.image_id,
                "class_name": pair.class_name,
            }) + "\n")
            count += 1
    return count


def read_pairs_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
