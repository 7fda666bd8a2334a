"""
ForgeFighter - Attack-aware forgery detection.

This package provides counter-forensic attacks, a two-stream detector with a
weak-localization head, worst-of-K red-team training, a randomized test-time
defense and a deployment-style evaluation suite.
"""

__version__ = "0.1.0"
