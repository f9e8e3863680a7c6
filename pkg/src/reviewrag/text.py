"""Shared tokenizer used by retrieval and by every text metric."""

import re

# Letters and digits of any script; underscore is a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric boundaries.

    No stopword removal, no stemming.

    >>> tokenize("Ótimo produto, chegou RÁPIDO!")
    ['ótimo', 'produto', 'chegou', 'rápido']
    """
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


def word_count(text: str) -> int:
    return len(text.split())
