"""Sobolev (gradient-enhanced) MLP surrogates with adaptive residual weighting."""

__version__ = "0.1.0"
