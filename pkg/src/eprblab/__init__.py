"""Numerical laboratory for the photon EPRB experiment.

Quantum predictions (:mod:`eprblab.qm`), a two-mode local signal model
(:mod:`eprblab.model`), its coincidence integral by quadrature and Monte
Carlo (:mod:`eprblab.integrate`), CHSH auditing (:mod:`eprblab.bounds`) and
reproducible run reports (:mod:`eprblab.harness`, :mod:`eprblab.cli`).
"""

__version__ = "0.1.0"
