"""Text front end: tokenization, count vectors, smoothed TF-IDF.

Tokens are maximal runs of Unicode word characters (letters, combining
marks, decimal digits) of length >= 2 code points, after case folding.
The weighting is raw counts times a smoothed inverse document frequency,
idf(t) = ln((1 + n)/(1 + df(t))) + 1, with L2 row normalization.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .audio_features import FeatureMatrix, Provenance
from .errors import DataError, ShapeMismatch


class EmptyCorpus(DataError):
    pass


def _is_word_char(ch: str) -> bool:
    # Letters, combining marks (vowel signs and the like), decimal digits.
    # Deliberately narrower than regex \w: no underscore, no connectors.
    cat = unicodedata.category(ch)
    return cat[0] in ("L", "M") or cat == "Nd"


def tokenize(text: str) -> list[str]:
    """Case-fold, then emit maximal word-character runs of length >= 2."""
    folded = text.casefold()
    tokens = []
    run_start = None
    for i, ch in enumerate(folded):
        if _is_word_char(ch):
            if run_start is None:
                run_start = i
        elif run_start is not None:
            if i - run_start >= 2:
                tokens.append(folded[run_start:i])
            run_start = None
    if run_start is not None and len(folded) - run_start >= 2:
        tokens.append(folded[run_start:])
    return tokens


@dataclass(frozen=True)
class Vocabulary:
    """Dense term -> column mapping in lexicographic term order."""

    index: dict[str, int]

    def __len__(self) -> int:
        return len(self.index)

    @property
    def terms(self) -> tuple[str, ...]:
        ordered = sorted(self.index.items(), key=lambda kv: kv[1])
        return tuple(term for term, _ in ordered)


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Sparse n_docs x |vocabulary| occurrence counts."""

    rows: sparse.csr_matrix
    vocabulary: Vocabulary

    @property
    def n_docs(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True, eq=False)
class TfidfModel:
    vocabulary: Vocabulary
    idf: np.ndarray


def fit_vocabulary(docs: Sequence[Iterable[str]]) -> Vocabulary:
    terms = sorted({token for doc in docs for token in doc})
    return Vocabulary({term: i for i, term in enumerate(terms)})


def count_transform(docs: Sequence[Iterable[str]], v: Vocabulary) -> CountMatrix:
    """Count in-vocabulary tokens per document; unknown tokens are dropped."""
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for doc in docs:
        tally = Counter(token for token in doc if token in v.index)
        for term, count in sorted(tally.items()):
            indices.append(v.index[term])
            data.append(count)
        indptr.append(len(indices))
    rows = sparse.csr_matrix(
        (np.asarray(data, dtype=np.int64), np.asarray(indices, dtype=np.int64), indptr),
        shape=(len(docs), len(v)),
    )
    return CountMatrix(rows, v)


def fit_tfidf(c: CountMatrix) -> TfidfModel:
    """Smoothed idf: ln((1 + n_docs)/(1 + df)) + 1, always positive."""
    n = c.n_docs
    if n < 1:
        raise EmptyCorpus("tf-idf requires at least one document")
    df = np.bincount(c.rows.indices, minlength=len(c.vocabulary)).astype(np.float64)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    return TfidfModel(c.vocabulary, idf)


def tfidf_transform(c: CountMatrix, m: TfidfModel) -> FeatureMatrix:
    """count * idf per cell, then L2-normalize rows; zero rows stay zero."""
    if c.rows.shape[1] != m.idf.size:
        raise ShapeMismatch(
            f"count matrix has {c.rows.shape[1]} columns, model expects {m.idf.size}"
        )
    weighted = c.rows.toarray().astype(np.float64) * m.idf[None, :]
    norms = np.linalg.norm(weighted, axis=1)
    nonzero = norms > 0.0
    weighted[nonzero] /= norms[nonzero, None]
    return FeatureMatrix(weighted, Provenance.TEXT)
