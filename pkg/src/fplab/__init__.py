"""fplab: a simulation and solver laboratory for mean-field frozen percolation
on k-type inhomogeneous random graphs.

Modules
-------
perron     spectral toolkit for column-weighted kernels (the shared core)
branching  multitype Poisson branching trees: survival, progeny distributions
smol       truncated Smoluchowski coagulation solver with gel accounting
typeflow   the critical type-flow ODE: critical time, freeze rate, integration
fpsim      event-driven finite-N simulator of the frozen percolation process
harness    convergence experiments, composition reports, CLI entry point
"""

from __future__ import annotations

__version__ = "0.1.0"
