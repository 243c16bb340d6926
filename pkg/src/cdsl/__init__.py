"""Context-driven data mining toolkit: missing-data imputation, outlier
scoring, weighted regression, random forests and lexicon team coefficients."""

__version__ = "0.1.0"
