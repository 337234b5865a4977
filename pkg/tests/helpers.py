import numpy as np

from mlasdi.autoencoder import AutoencoderPair, MlpNetwork
from mlasdi.gp_interp import GpCoefficientField
from mlasdi.rom import StageModel


def identity_stage(parameters, coefficients, epsilon_prev=1.0):
    """Stage whose autoencoder is the identity, so rollouts are visible directly."""
    coefficients = np.asarray(coefficients, dtype=np.float64)
    n = coefficients.shape[1]
    enc = MlpNetwork((n, n), [np.eye(n)], [np.zeros(n)])
    dec = MlpNetwork((n, n), [np.eye(n)], [np.zeros(n)])
    ae = AutoencoderPair(enc, dec, np.zeros(n), 1.0, np.zeros(n), 1.0)
    params = np.atleast_2d(np.asarray(parameters, dtype=np.float64))
    if params.shape[0] == 1 and coefficients.shape[0] != 1:
        params = params.T
    return StageModel(ae, coefficients, params, GpCoefficientField(params, coefficients),
                      epsilon_prev)
