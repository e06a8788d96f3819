"""Bernstein-type tail bounds for weakly dependent sequences.

Evaluators for the deviation inequalities, the Cantor-type block
construction behind them, mixing/tail envelopes, example process
generators and a Monte-Carlo harness that checks the bounds against
simulated tail frequencies.
"""

__version__ = "0.1.0"
