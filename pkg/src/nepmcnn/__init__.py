"""Hybrid-feature multi-channel CNN sentiment classification for Nepali tweets."""

__version__ = "0.1.0"
