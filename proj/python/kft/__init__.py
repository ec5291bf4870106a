"""Python facade over the compiled core (`_kft`)."""

from _kft import (  # noqa: F401
    KftError,
    LanguageModel,
    Vocab,
    bleu4,
    check_draft,
    extract_triples,
    lcs_length,
    rouge_l,
    rouge_n,
    verbalize,
)

__all__ = [
    "KftError",
    "LanguageModel",
    "Vocab",
    "bleu4",
    "check_draft",
    "extract_triples",
    "lcs_length",
    "rouge_l",
    "rouge_n",
    "verbalize",
]
