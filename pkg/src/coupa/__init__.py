"""Continuous-time and position-aware recommender, desk scale.

Subpackages cover the differentiable core (nn_core), functional time
encoding, continuous-time attention, the intensity-free point process,
personalized position debiasing, the assembled model and training loop,
a synthetic event generator, ranking metrics, and a deterministic
simulation of multi-tier sequence fusion with two-stage serving.
"""

__version__ = "0.1.0"
