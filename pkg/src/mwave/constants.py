"""Physical constants (SI)."""

from scipy import constants as _sc

C0 = _sc.c
EPS0 = _sc.epsilon_0
MU0 = _sc.mu_0
ETA0 = (MU0 / EPS0) ** 0.5

# 20 / ln(10): nepers to decibels
NP_TO_DB = 8.685889638065035
