"""Two-component stochastic nonlinear Schrodinger simulator and identity checker"""

__version__ = "0.1.0"
__description__ = "Spectral solvers and Ito-identity diagnostics for a noisy NLS system"
