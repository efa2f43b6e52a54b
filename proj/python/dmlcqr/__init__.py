"""Double/debiased machine learning for censored quantile regression."""

from ._dmlcqr import Error, estimate, generate, lasso_logit, lasso_ls, lasso_qr, simulate

__all__ = ["Error", "estimate", "generate", "lasso_logit", "lasso_ls", "lasso_qr", "simulate"]
