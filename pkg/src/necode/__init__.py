"""Desk-scale toolkit for non-transferable input recodings.

Perturbations are confined to the tau-insensitive right-singular subspace of
an authorized model's first linear operator: the authorized model's features
barely move while other models degrade.  Subpackages: linalg (dense spectral
routines), nn (tiny trainable models and datasets), firstlayer (operator
extraction), recoder (subspace identification and synthesis), bounds
(numerical verification of the retention/degradation inequalities), harness
(evaluation protocol), cli (command line entry point).
"""

__version__ = "0.1.0"

from necode._kernels import active_backend

__all__ = ["active_backend", "__version__"]
