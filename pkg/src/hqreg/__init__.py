"""Huberised regularised Bayesian quantile regression: samplers, density kernels, benchmarks."""

__version__ = "0.1.0"
