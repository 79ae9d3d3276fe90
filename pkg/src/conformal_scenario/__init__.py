"""Conformal prediction and scenario optimization, side by side.

Set predictors and nonconformity quantiles on one side, linear scenario
programs with support-set cascade discarding on the other, plus a seeded
Monte Carlo harness that checks the coverage and violation guarantees
linking the two.
"""

__version__ = "0.1.0"
