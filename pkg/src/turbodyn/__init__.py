"""Turbo decoding as a discrete-time dynamical system.

Encode, transmit over AWGN with scaled noise realizations, decode with
log-MAP BCJR while recording per-half-iteration LLR statistics, classify the
decoder's motion, and stop early with the min-LLR / candidate-point rule.
"""

__version__ = "0.1.0"
