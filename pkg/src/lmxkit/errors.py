"""Exception types shared across the toolkit."""


class LmxError(Exception):
    """Base class for all toolkit errors."""


class ParseError(LmxError):
    """Malformed XML input. Carries (line, column) when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedStructure(LmxError):
    """Input is well-formed XML but outside the supported MusicXML subset
    (score-timewise root, more than two staves per part, ...)."""


class SerializeError(LmxError):
    """A document violates a model invariant; message names the element path."""


class CanonicalizationError(LmxError):
    """Measure content cannot be reconciled with the active time signature."""

    def __init__(self, message, measure_index=None, voice=None):
        super().__init__(message)
        self.measure_index = measure_index
        self.voice = voice


class LinearizeError(LmxError):
    """Input document is not in canonical form."""


class UnsupportedFeature(LmxError):
    """Feature outside the token language (nested tuplets, exotic tuplet ratios)."""


class DecompositionError(LmxError):
    """Duration cannot be written as a finite sum of binary note values."""


class EvaluationError(LmxError):
    """Corpus evaluation could not be set up (missing files, empty reference)."""
