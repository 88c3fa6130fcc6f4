"""Word tokenization and sentence splitting shared by every metric."""

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

# letters/digits plus straight and curly apostrophes; underscore is not a letter
_TOKEN_RE = re.compile(r"(?:[^\W_]|['’])+")
_TERMINATOR_RE = re.compile(r"[.!?]+[\"'’”)\]]*")
_NEXT_SENTENCE_RE = re.compile(r"\s+[\"'‘“(\[]*(?=[A-Z])")


@dataclass(frozen=True)
class TokenSequence:
    tokens: list
    spans: list = field(default_factory=list)
    text: str = ""

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    end: int
    tokens: TokenSequence


@dataclass(frozen=True)
class SentenceList:
    text: str
    sentences: list

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    @property
    def texts(self):
        return [s.text for s in self.sentences]

    @property
    def lengths(self):
        return [len(s.tokens) for s in self.sentences]


def tokenize(text: str) -> TokenSequence:
    """Lowercased maximal runs of letters, digits and apostrophes.

    Punctuation, hyphens and whitespace separate tokens and are dropped.
    ``spans`` holds ``(start, end)`` character offsets into ``text``.
    """
    tokens, spans = [], []
    for m in _TOKEN_RE.finditer(text):
        tokens.append(m.group().lower())
        spans.append(m.span())
    return TokenSequence(tokens, spans, text)


def parse_abbreviations(lines):
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip().lower()
        if line:
            out.append(line)
    # longest first so "et al." wins over "al."
    return tuple(sorted(set(out), key=lambda a: (-len(a), a)))


@lru_cache(maxsize=None)
def default_abbreviations():
    data = resources.files("stylometer").joinpath("data/abbreviations.txt")
    return parse_abbreviations(data.read_text(encoding="utf-8").splitlines())


def load_abbreviations(path):
    with open(path, encoding="utf-8") as f:
        return parse_abbreviations(f)


def _ends_with_abbreviation(text, end, abbreviations):
    head = text[:end].lower()
    for abbr in abbreviations:
        if head.endswith(abbr):
            start = end - len(abbr)
            if start == 0 or not text[start - 1].isalnum():
                return True
    return False


def split_sentences(text: str, abbreviations=None) -> SentenceList:
    """Split on ``.``/``!``/``?`` followed by whitespace and a capital, or by end of text.

    A period that completes a listed abbreviation never splits. Candidate
    spans without any word token (stray punctuation) are folded into the
    neighbouring sentence so every sentence has at least one token.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()

    boundaries = []
    for m in _TERMINATOR_RE.finditer(text):
        end = m.end()
        rest = text[end:]
        if rest.strip() and not _NEXT_SENTENCE_RE.match(rest):
            continue
        # only a lone trailing period can belong to an abbreviation
        if (
            rest.strip()
            and m.group().rstrip("\"'’”)]") == "."
            and _ends_with_abbreviation(text, m.start() + 1, abbreviations)
        ):
            continue
        boundaries.append(end)
    if not boundaries or text[boundaries[-1]:].strip():
        boundaries.append(len(text))

    raw = []
    pos = 0
    for end in boundaries:
        chunk = text[pos:end]
        lead = len(chunk) - len(chunk.lstrip())
        start = pos + lead
        stop = pos + len(chunk.rstrip())
        if stop > start:
            raw.append([start, stop])
        pos = end

    merged = []
    pending_start = None
    for start, stop in raw:
        if pending_start is not None:
            start, pending_start = pending_start, None
        if _TOKEN_RE.search(text, start, stop) is None:
            if merged:
                merged[-1][1] = stop
            else:
                pending_start = start
            continue
        merged.append([start, stop])

    sentences = []
    for start, stop in merged:
        s = text[start:stop]
        sentences.append(Sentence(s, start, stop, tokenize(s)))
    return SentenceList(text, sentences)
