"""
Django UB-MAUD Package

Structured-covariance multivariate regression for outcomes with an
interconnected community structure: a closed-form uniform-block matrix
kernel, the two-stage estimator (OLS coefficients, Fisher-scoring
dependence parameters), Wald/FDR inference and a Monte-Carlo harness.
"""

__version__ = '1.0.0'
