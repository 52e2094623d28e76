"""Technology mention mining and tag co-occurrence analysis for tagged article corpora."""

from techlens.corpus import Article, Corpus, DateRange, filter_by_date, load_corpus, normalize_tag, save_corpus
from techlens.techdict import TechDictionary, TechEntry, classify_tag, compile_pattern, load_dictionary

__all__ = [
    "Article",
    "Corpus",
    "DateRange",
    "TechDictionary",
    "TechEntry",
    "classify_tag",
    "compile_pattern",
    "filter_by_date",
    "load_corpus",
    "load_dictionary",
    "normalize_tag",
    "save_corpus",
]

__version__ = "0.1.0"
