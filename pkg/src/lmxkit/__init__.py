"""Linearized MusicXML toolkit.

Parse and write pianoform MusicXML, normalize it into a canonical form,
convert it to and from a closed token language, and evaluate OMR output
with normalized tree edit distance and sequence error rates.
"""

from .augment import AugmentConfig, RasterImage, augment, edge_negate
from .canonicalize import CanonicalReport, canonicalize, durations_consistent
from .delinearize import (DelinearizeWarning, PitchContext, compose_duration,
                          delinearize, infer_alter)
from .errors import (CanonicalizationError, DecompositionError, EvaluationError,
                     LinearizeError, LmxError, ParseError, SerializeError,
                     UnsupportedFeature, UnsupportedStructure)
from .linearize import decompose_duration, linearize
from .model import (Attributes, Backup, Clef, Forward, Measure, Note, Part, Pitch,
                    ScoreDocument, TimeModification, TimeSignature)
from .musicxml import parse_musicxml, read_score, serialize_musicxml
from .seqmetrics import SequenceEvalResult, cer, levenshtein, ler, ser
from .treedist import (CostModel, LabeledTree, NoteLabel, TednResult, TreeNode,
                       edit_script, tedn, tree_from_musicxml, zhang_shasha)
from .vocab import TokenSequence, Vocabulary, tokenize_lmx, vocabulary

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig", "RasterImage", "augment", "edge_negate",
    "CanonicalReport", "canonicalize", "durations_consistent",
    "DelinearizeWarning", "PitchContext", "compose_duration", "delinearize",
    "infer_alter",
    "CanonicalizationError", "DecompositionError", "EvaluationError",
    "LinearizeError", "LmxError", "ParseError", "SerializeError",
    "UnsupportedFeature", "UnsupportedStructure",
    "decompose_duration", "linearize",
    "Attributes", "Backup", "Clef", "Forward", "Measure", "Note", "Part", "Pitch",
    "ScoreDocument", "TimeModification", "TimeSignature",
    "parse_musicxml", "read_score", "serialize_musicxml",
    "SequenceEvalResult", "cer", "levenshtein", "ler", "ser",
    "CostModel", "LabeledTree", "NoteLabel", "TednResult", "TreeNode",
    "edit_script", "tedn", "tree_from_musicxml", "zhang_shasha",
    "TokenSequence", "Vocabulary", "tokenize_lmx", "vocabulary",
    "__version__",
]
