"""Information-flow guard inference over a small object IR."""

__version__ = "0.1.0"
