"""GAF-encoded EEG classification with a contextual-attention CNN."""

__version__ = "0.1.0"
