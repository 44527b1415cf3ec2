"""Trigonometric Ruijsenaars-Schneider hierarchy / 2D Toda tau-function toolkit.

The package verifies, by direct computation, that the zeros of the
determinant tau-function evolved in the hierarchy time t_m (resp. tbar_m)
follow the Hamiltonian flow generated by tr L^m (resp. tr L^-m) of the
trigonometric Ruijsenaars-Schneider model.

Layout
------
``linalg``    dense complex LU / expm / Aberth roots / circle quadrature
``dynamics``  model parameters, phase states, Lax matrices, Hamiltonians
``flows``     adaptive complex-time integration of the hierarchy flows
``tau``       determinant tau-function, zero tracking, bilinear identities
``waves``     pole-ansatz wave functions and residue identities
``backlund``  Backlund pair and the discrete-time generating equation
``checks``    named verification checks used by the CLI harness
``cli``       ``rstoda simulate|verify|sweep``
"""

from .dynamics import ModelParams, PhaseState
from .errors import RSTodaError

__all__ = ["ModelParams", "PhaseState", "RSTodaError"]
__version__ = "0.1.0"
