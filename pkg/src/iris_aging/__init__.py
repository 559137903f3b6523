"""Iris template aging analysis: quality covariates, a Gabor iris matcher,
genuine-pair records and OLS regression with significance tests."""

__version__ = "0.1.0"
