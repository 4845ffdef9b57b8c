"""The closed token inventory of the linearized score language.

Every token the linearizer can emit and the only tokens the delinearizer
will act on. The inventory is versioned and published as a plain-text
file (one token per line) shipped with the package; ``lmx vocab`` prints
it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .model import ACCIDENTALS, NOTE_TYPES, STEPS

VOCABULARY_VERSION = "1"

TIMEMOD_TOKENS = ("2in3", "3in2", "4in3", "5in4", "6in4", "7in4", "7in8", "9in8")

TIME_BEATS_RANGE = range(1, 17)
TIME_BEAT_TYPES = (1, 2, 4, 8, 16, 32)

# canonical emission order of articulation/ornament tokens on one note
ORNAMENT_TOKEN_ORDER = (
    "staccato", "accent", "tenuto", "trill",
    "mordent", "inverted-mordent", "turn", "inverted-turn",
    "fermata", "arpeggiate",
    "tremolo:1", "tremolo:2", "tremolo:3", "tremolo:4",
)


@dataclass(frozen=True)
class Vocabulary:
    version: str
    tokens: tuple[str, ...]
    categories: dict[str, str] = field(hash=False)

    def __contains__(self, token: str) -> bool:
        return token in self.categories

    def category(self, token: str) -> Optional[str]:
        return self.categories.get(token)


def _build() -> Vocabulary:
    entries: list[tuple[str, str]] = [("measure", "structural"),
                                      ("backup", "backup"),
                                      ("forward", "forward")]
    entries += [(t, "type") for t in NOTE_TYPES]
    entries += [(f"{step}{octave}", "pitch")
                for octave in range(10) for step in "CDEFGAB"]
    entries += [("rest", "rest"), ("rest:measure", "rest")]
    entries.append(("dot", "dot"))
    entries += [("grace", "grace"), ("grace:slash", "grace")]
    entries.append(("chord", "chord"))
    entries += [(a, "accidental") for a in ACCIDENTALS]
    entries += [(f"voice:{v}", "voice") for v in range(1, 9)]
    entries += [(f"staff:{s}", "staff") for s in (1, 2)]
    entries += [(f"stem:{s}", "stem") for s in ("up", "down", "none")]
    # beam:continue is inferable and deliberately absent
    entries += [(f"beam:{b}", "beam")
                for b in ("begin", "end", "forward-hook", "backward-hook")]
    entries += [(f"tied:{k}", "tied") for k in ("start", "stop")]
    entries += [(f"slur:{k}", "slur") for k in ("start", "stop")]
    entries += [(f"tuplet:{k}", "tuplet") for k in ("start", "stop")]
    entries += [(t, "timemod") for t in TIMEMOD_TOKENS]
    entries += [(f"clef:{sign}{line}", "clef")
                for sign in ("G", "F", "C") for line in range(1, 6)]
    entries += [(f"key:fifths:{n}", "key") for n in range(-7, 8)]
    entries += [(f"time:{n}", "time") for n in TIME_BEATS_RANGE]
    entries += [(f"/{n}", "time") for n in TIME_BEAT_TYPES]
    entries += [(t, "ornament") for t in ORNAMENT_TOKEN_ORDER]

    tokens = tuple(t for t, _ in entries)
    categories = {t: c for t, c in entries}
    assert len(tokens) == len(categories), "duplicate token in vocabulary"
    return Vocabulary(version=VOCABULARY_VERSION, tokens=tokens, categories=categories)


_VOCABULARY = _build()


def vocabulary() -> Vocabulary:
    """The closed token inventory (stable across runs)."""
    return _VOCABULARY


def vocabulary_file_text() -> str:
    """Contents of the published vocabulary file: one token per line."""
    return "\n".join(_VOCABULARY.tokens) + "\n"


def packaged_vocabulary_text() -> str:
    """The vocabulary file shipped with the package (for consistency checks)."""
    ref = resources.files("lmxkit").joinpath(
        f"data/vocabulary-v{VOCABULARY_VERSION}.txt")
    return ref.read_text(encoding="utf-8")


@dataclass
class TokenSequence:
    """An ordered token stream, optionally with per-token source positions."""

    tokens: list[str]
    provenance: Optional[list[tuple[int, int]]] = None  # (measure, element) indices

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        if isinstance(other, TokenSequence):
            return self.tokens == other.tokens
        return NotImplemented

    def text(self) -> str:
        """Canonical file form: one measure per line, single spaces."""
        lines: list[list[str]] = []
        for token in self.tokens:
            if token == "measure" or not lines:
                lines.append([])
            lines[-1].append(token)
        return "\n".join(" ".join(line) for line in lines) + ("\n" if lines else "")


def tokenize_lmx(text: str) -> list[str]:
    """Split an .lmx payload; any whitespace run is one separator."""
    return text.split()
