"""Monte Carlo toolkit for Brownian super-exponents.

The super-exponent of a generating process ``X`` with initial value
``y > 0`` is ``Y(t) = Z_X(t) / (1/y + A(t)/2)``, where ``Z_X`` is the
stochastic exponential of ``X`` and ``A(t) = int_0^t |X|^2 Z_X du``.
"""

__version__ = "0.1.0"
