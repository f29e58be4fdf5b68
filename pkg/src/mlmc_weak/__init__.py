"""Monte Carlo and multilevel Monte Carlo weak-error estimators with
sampling-error bounds, tested on a geometric Brownian motion and a
stochastic heat equation."""

__version__ = "0.1.0"
