"""
Sink/source recovery toolkit for the Neumann potential equation.

Recovers sparse sink/source terms from boundary observations with weighted
l1 regularization and certifies configurations before or after solving.
"""

__version__ = "0.1.0"
