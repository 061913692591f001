"""Markup stripping, tokenization, collocation joining, vocabulary building."""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence


class TextprepError(ValueError):
    pass


@dataclass
class TokenStream:
    message_id: str
    tokens: list[str]


# ---------------------------------------------------------------------------
# markup stripping

_CODE_BLOCK_RE = re.compile(r"<(pre|code)\b[^>]*>.*?(</\1\s*>|\Z)", re.IGNORECASE | re.DOTALL)
_TAG_RE = re.compile(r"<[^>]+>")
_WS_RE = re.compile(r"\s+")


def strip_markup(body_raw: str) -> str:
    """Drop code/pre blocks with their content, strip remaining HTML tags,
    decode entities, collapse whitespace.  Unclosed code blocks are removed
    to the end of the text."""
    text = html.unescape(body_raw)
    text = _CODE_BLOCK_RE.sub(" ", text)
    text = _TAG_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


# ---------------------------------------------------------------------------
# Porter-style suffix stripping

_VOWELS = "aeiou"


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences in [C](VC)^m[V]."""
    m = 0
    prev_cons = True
    started = False
    for i in range(len(stem)):
        cons = _is_cons(stem, i)
        if not cons:
            started = True
        if started and cons and not prev_cons:
            m += 1
        prev_cons = cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _ends_cvc(stem: str) -> bool:
    n = len(stem)
    if n < 3:
        return False
    if not (_is_cons(stem, n - 3) and not _is_cons(stem, n - 2) and _is_cons(stem, n - 1)):
        return False
    return stem[-1] not in "wxy"


def _ends_double_cons(stem: str) -> bool:
    return len(stem) >= 2 and stem[-1] == stem[-2] and _is_cons(stem, len(stem) - 1)


_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]
_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]
_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def porter_stem(word: str) -> str:
    """Deterministic suffix stripping for vocabulary normalization."""
    if len(word) <= 2:
        return word
    w = word

    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s"):
        w = w[:-1]

    # step 1b
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    else:
        hit = None
        if w.endswith("ed") and _has_vowel(w[:-2]):
            hit = w[:-2]
        elif w.endswith("ing") and _has_vowel(w[:-3]):
            hit = w[:-3]
        if hit is not None:
            w = hit
            if w.endswith(("at", "bl", "iz")):
                w += "e"
            elif _ends_double_cons(w) and w[-1] not in "lsz":
                w = w[:-1]
            elif _measure(w) == 1 and _ends_cvc(w):
                w += "e"

    # step 1c
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    for suffix, repl in _STEP2:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    for suffix, repl in _STEP3:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    for suffix in _STEP4:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if suffix == "ion" and not stem.endswith(("s", "t")):
                break
            if _measure(stem) > 1:
                w = stem
            break

    # step 5a
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem

    # step 5b
    if _measure(w) > 1 and _ends_double_cons(w) and w.endswith("l"):
        w = w[:-1]

    return w


# ---------------------------------------------------------------------------
# tokenization

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_NUMERIC_RE = re.compile(r"^[0-9]+$")


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Shipped stopword list (one token per line), overridable via ``path``."""
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    else:
        lines = (
            resources.files("microevents.assets").joinpath("stopwords.txt")
            .read_text(encoding="utf-8").splitlines()
        )
    return frozenset(w.strip() for w in lines if w.strip() and not w.startswith("#"))


def tokenize_normalize(clean_text: str, stopwords: frozenset[str], message_id: str = "") -> TokenStream:
    """Lowercase, split on non-alphanumerics, drop short/numeric/stopword
    tokens, then suffix-strip."""
    tokens = []
    for raw in _TOKEN_RE.findall(clean_text.lower()):
        if len(raw) < 3 or _NUMERIC_RE.match(raw) or raw in stopwords:
            continue
        tokens.append(porter_stem(raw))
    return TokenStream(message_id=message_id, tokens=tokens)


# ---------------------------------------------------------------------------
# collocations

class PhraseModel:
    """Joins co-occurring token pairs into single ``a_b`` tokens.

    A pair qualifies when count(a,b) >= min_count and
    (count(a,b) - min_count) * N / (count(a) * count(b)) >= threshold,
    with N the total training token count.  Two stacked passes turn frequent
    pairs of (joined) tokens into tri-grams.
    """

    def __init__(self, min_count: int = 20, threshold: float = 10.0, passes: int = 2):
        if min_count < 1:
            raise TextprepError("min_count must be >= 1")
        self.min_count = min_count
        self.threshold = threshold
        self.passes = passes
        self.phrases: list[set[tuple[str, str]]] = []

    def fit(self, streams: Iterable[Sequence[str]]) -> "PhraseModel":
        material = [list(s) for s in streams]
        self.phrases = []
        for _ in range(self.passes):
            qualified = self._fit_single(material)
            self.phrases.append(qualified)
            material = [self._apply_single(s, qualified) for s in material]
        return self

    def _fit_single(self, streams: list[list[str]]) -> set[tuple[str, str]]:
        unigram: dict[str, int] = {}
        bigram: dict[tuple[str, str], int] = {}
        total = 0
        for tokens in streams:
            total += len(tokens)
            for t in tokens:
                unigram[t] = unigram.get(t, 0) + 1
            for a, b in zip(tokens, tokens[1:]):
                bigram[(a, b)] = bigram.get((a, b), 0) + 1
        qualified = set()
        for (a, b), n_ab in bigram.items():
            if n_ab < self.min_count:
                continue
            score = (n_ab - self.min_count) * total / (unigram[a] * unigram[b])
            if score >= self.threshold:
                qualified.add((a, b))
        return qualified

    @staticmethod
    def _apply_single(tokens: Sequence[str], qualified: set[tuple[str, str]]) -> list[str]:
        out: list[str] = []
        i = 0
        while i < len(tokens):
            if i + 1 < len(tokens) and (tokens[i], tokens[i + 1]) in qualified:
                out.append(tokens[i] + "_" + tokens[i + 1])
                i += 2
            else:
                out.append(tokens[i])
                i += 1
        return out

    def apply(self, tokens: Sequence[str]) -> list[str]:
        out = list(tokens)
        for qualified in self.phrases:
            out = self._apply_single(out, qualified)
        return out

    def apply_stream(self, stream: TokenStream) -> TokenStream:
        return TokenStream(stream.message_id, self.apply(stream.tokens))


def detect_collocations(
    streams: Iterable[TokenStream], min_count: int = 20, score_threshold: float = 10.0
) -> PhraseModel:
    model = PhraseModel(min_count=min_count, threshold=score_threshold)
    model.fit(s.tokens for s in streams)
    return model


# ---------------------------------------------------------------------------
# vocabulary

@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    doc_freqs: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    def id_to_token(self) -> list[str]:
        out = [""] * len(self.token_to_id)
        for tok, i in self.token_to_id.items():
            out[i] = tok
        return out

    def save_tsv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in sorted(self.token_to_id, key=self.token_to_id.get):
                fh.write(f"{tok}\t{self.token_to_id[tok]}\t{self.doc_freqs.get(tok, 0)}\n")

    @classmethod
    def load_tsv(cls, path: str) -> "Vocabulary":
        token_to_id: dict[str, int] = {}
        doc_freqs: dict[str, int] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    continue
                tok, idx, df = line.rstrip("\n").split("\t")
                token_to_id[tok] = int(idx)
                doc_freqs[tok] = int(df)
        return cls(token_to_id, doc_freqs)


def build_vocabulary(
    train_streams: Sequence[TokenStream], min_df: int = 5, max_df_fraction: float = 0.5
) -> Vocabulary:
    """Document-frequency-bounded vocabulary, fitted on training streams only."""
    df: dict[str, int] = {}
    n_docs = 0
    for stream in train_streams:
        n_docs += 1
        for tok in set(stream.tokens):
            df[tok] = df.get(tok, 0) + 1
    kept = sorted(t for t, d in df.items() if d >= min_df and d / max(n_docs, 1) <= max_df_fraction)
    if not kept:
        raise TextprepError("empty vocabulary after document-frequency filtering")
    return Vocabulary({t: i for i, t in enumerate(kept)}, {t: df[t] for t in kept})


def encode_bow(stream: TokenStream, vocab: Vocabulary) -> dict[int, int]:
    """Sparse token-id counts; out-of-vocabulary tokens are dropped."""
    counts: dict[int, int] = {}
    for tok in stream.tokens:
        idx = vocab.token_to_id.get(tok)
        if idx is not None:
            counts[idx] = counts.get(idx, 0) + 1
    return counts
