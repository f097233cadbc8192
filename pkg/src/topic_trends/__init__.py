"""Topic trends in short-text corpora: sampling, LDA, geotagging and weekly trend tables."""

__version__ = "0.1.0"
