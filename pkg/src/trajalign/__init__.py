"""Representational and latent-trajectory similarity between a multichannel
signal recording and a layerwise model-embedding tensor.

Modules
-------
numcore
    Correlations, moments, eigendecomposition, Gaussian KL, Gamma weights.
encoding
    Signal/embedding containers and nested-CV layerwise ridge encoding.
repsim
    MSE, Pearson, RDM/RSA, linear CKA, channel-time maps, connectivity.
ltc
    Trajectories, step geometry, matrix entropy, confidence, MI,
    Lyapunov exponent, DRA, alignment profiles, PCA-1 coordinates.
ingest
    Checksummed tensor files, manifests, CSV import, synthetic data.
cli
    ``trajalign`` command-line pipeline.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
