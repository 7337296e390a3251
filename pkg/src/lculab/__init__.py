"""Simulation toolkit for combining quantum states and its applications.

Statevector primitives live in :mod:`lculab.qcore`; overlap estimators in
:mod:`lculab.estimate`; fractional unitary powers in :mod:`lculab.fracpow`;
state combination in :mod:`lculab.lcu`; search in :mod:`lculab.grover`;
classical-vector loading in :mod:`lculab.prep`.
"""

__version__ = "0.1.0"

from .errors import LabError
from .qcore import CostLedger, RandomSource, StateVector, new_state

__all__ = ["CostLedger", "LabError", "RandomSource", "StateVector", "__version__", "new_state"]
