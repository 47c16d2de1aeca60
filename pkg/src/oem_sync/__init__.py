"""Simulation engine for a charge qubit synchronized to an optical reference
drive through a mechanical resonator.

Subpackages and modules:

* ``linalg``    sparse operators, states, composite-space embeddings
* ``model``     Hamiltonians and collapse operators of the hybrid system
* ``solvers``   master equation, quantum trajectories, seeded ensembles
* ``analysis``  phases, branch labeling, synchronization metrics
* ``config``    key=value run configuration
* ``output``    bit-exact CSV and deterministic SVG emission
* ``kernels``   numba / numpy integration backends
* ``cli``       the ``oem-sync`` command
"""

from . import analysis, config, kernels, linalg, model, output, solvers

__version__ = "0.1.0"

__all__ = [
    "analysis",
    "config",
    "kernels",
    "linalg",
    "model",
    "output",
    "solvers",
    "__version__",
]
