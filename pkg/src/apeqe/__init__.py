"""Desk-scale automatic post-editing and word-level quality estimation.

Factored attention seq2seq models over five input representations,
log-linear ensemble decoding with tunable (possibly negative) weights,
MERT weight tuning for TER or F1-Mult, and OK/BAD tag derivation by
word-level edit alignment against (pseudo-)post-edits.
"""

__version__ = "0.1.0"
