"""Contextual stochastic block model laboratory.

Sampling (:mod:`csbm.model`), linearised and full message passing
(:mod:`csbm.linbp`, :mod:`csbm.fullbp`), density evolution (:mod:`csbm.de`),
the spectral estimator (:mod:`csbm.spectral`), asymptotic predictions
(:mod:`csbm.theory`) and the experiment harness (:mod:`csbm.cli`).
"""
__version__ = "0.1.0"
