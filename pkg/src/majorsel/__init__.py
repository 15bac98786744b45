"""Signaling policies for selecting one agent under Bayesian persuasion,
built to be approximately majorized, with exact evaluation and audits."""

__version__ = "0.1.0"
