"""Shallow exponential-network synthesis for continuous functions on boxes.

Builds the soft cube indicators and the sliced global approximant, expands
them into explicit exp networks at desk scale, and audits every counting
bound the construction relies on.
"""

__version__ = "0.1.0"
