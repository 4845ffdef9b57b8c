"""Token-, character- and line-level error rates for token sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import EvaluationError
from .vocab import TokenSequence


@dataclass
class SequenceEvalResult:
    edit_distance: int
    reference_length: int
    rate_percent: float
    exact_match: bool


def levenshtein(pred: Sequence, gold: Sequence) -> int:
    """Unit-cost edit distance (insert/delete/substitute), iterative DP."""
    m, n = len(pred), len(gold)
    if m == 0:
        return n
    if n == 0:
        return m
    previous = list(range(n + 1))
    for i in range(1, m + 1):
        current = [i] + [0] * n
        p = pred[i - 1]
        for j in range(1, n + 1):
            current[j] = min(previous[j] + 1,
                             current[j - 1] + 1,
                             previous[j - 1] + (p != gold[j - 1]))
        previous = current
    return previous[n]


def _tokens(seq) -> list:
    if isinstance(seq, TokenSequence):
        return list(seq.tokens)
    if isinstance(seq, str):
        return seq.split()
    return list(seq)


def ser(pred, gold) -> SequenceEvalResult:
    """Symbol error rate: token-level edit distance over reference length."""
    pred_tokens, gold_tokens = _tokens(pred), _tokens(gold)
    if not gold_tokens:
        raise EvaluationError("SER is undefined for an empty reference sequence")
    distance = levenshtein(pred_tokens, gold_tokens)
    return SequenceEvalResult(
        edit_distance=distance,
        reference_length=len(gold_tokens),
        rate_percent=100.0 * distance / len(gold_tokens),
        exact_match=distance == 0,
    )


def cer(pred: str, gold: str) -> SequenceEvalResult:
    """Character error rate over canonical space-separated serializations."""
    if not gold:
        raise EvaluationError("CER is undefined for an empty reference string")
    distance = levenshtein(pred, gold)
    return SequenceEvalResult(
        edit_distance=distance,
        reference_length=len(gold),
        rate_percent=100.0 * distance / len(gold),
        exact_match=distance == 0,
    )


def ler(pred_corpus: Sequence, gold_corpus: Sequence,
        ids: Optional[Sequence[str]] = None) -> float:
    """Line error rate: percent of corpus lines that are not token-exact."""
    if len(pred_corpus) != len(gold_corpus):
        detail = ""
        if ids is not None:
            extra = list(ids[min(len(pred_corpus), len(gold_corpus)):])
            detail = f" (unmatched: {', '.join(map(str, extra))})"
        raise EvaluationError(
            f"corpus size mismatch: {len(pred_corpus)} predictions vs "
            f"{len(gold_corpus)} references{detail}")
    if not gold_corpus:
        raise EvaluationError("LER is undefined for an empty corpus")
    errors = sum(_tokens(p) != _tokens(g)
                 for p, g in zip(pred_corpus, gold_corpus))
    return 100.0 * errors / len(gold_corpus)


def micro_average(results: Sequence[SequenceEvalResult]) -> float:
    """Corpus rate as total distance over total reference length."""
    total_len = sum(r.reference_length for r in results)
    if total_len == 0:
        raise EvaluationError("micro average undefined: empty references")
    return 100.0 * sum(r.edit_distance for r in results) / total_len


def macro_average(results: Sequence[SequenceEvalResult]) -> float:
    """Corpus rate as the unweighted mean of per-sample rates."""
    if not results:
        raise EvaluationError("macro average undefined: no samples")
    return sum(r.rate_percent for r in results) / len(results)
