from typing import Tuple

import numpy as np
import pandas as pd

from causal_ssm.errors import ValidationError
from causal_ssm.logger import Logger
from causal_ssm.mcmc.models import PosteriorDraws
from causal_ssm.utils import write_table

LOG_ENTRY = "diagnostics"

MIN_CHAIN_LENGTH = 100
MAX_LAG = 1000


def autocorrelation(chain: np.ndarray, max_lag: int) -> np.ndarray:
    """
    Sample autocorrelations at lags 0..max_lag, through the FFT.
    """

    centred = chain - chain.mean()
    size = centred.size
    spectrum = np.fft.rfft(centred, n=2 * size)
    autocovariance = np.fft.irfft(spectrum * np.conj(spectrum), n=2 * size)[: max_lag + 1] / size
    return autocovariance / autocovariance[0]


def parzen_weights(max_lag: int) -> np.ndarray:
    ratio = np.arange(1, max_lag + 1) / max_lag
    return np.where(ratio <= 0.5, 1.0 - 6.0 * ratio**2 + 6.0 * ratio**3, 2.0 * (1.0 - ratio) ** 3)


def inefficiency_factor(chain: np.ndarray) -> Tuple[float, bool]:
    """
    Inefficiency factor 1 + 2 sum_l w_l rho_l with a Parzen window.

    The lag cutoff is min(1000, length / 10).

    Args:
        chain (np.ndarray): Draws of one scalar parameter.

    Returns:
        Tuple[float, bool]: The factor and a flag raised for a constant chain, whose factor is reported as 1.

    Raises:
        ValidationError: If the chain has fewer than 100 draws.
    """

    chain = np.asarray(chain, dtype=float).ravel()
    if chain.size < MIN_CHAIN_LENGTH:
        raise ValidationError(f"Inefficiency factors need at least {MIN_CHAIN_LENGTH} draws, got {chain.size}")
    if np.ptp(chain) <= 1e-12 * max(1.0, float(np.abs(chain).max())):
        return 1.0, True
    max_lag = min(MAX_LAG, chain.size // 10)
    rho = autocorrelation(chain, max_lag)[1:]
    return float(1.0 + 2.0 * np.sum(parzen_weights(max_lag) * rho)), False


def diagnostics_table(draws: PosteriorDraws) -> pd.DataFrame:
    """
    Inefficiency factor of every traced parameter, with the chain's acceptance rate.
    """

    rows = []
    for name, chain in draws.traces().items():
        if chain.size < MIN_CHAIN_LENGTH:
            value, degenerate = float("nan"), True
        else:
            value, degenerate = inefficiency_factor(chain)
        if degenerate:
            Logger.warning(LOG_ENTRY, f"{name}: inefficiency factor undefined, chain too short or constant")
        rows.append((name, value, degenerate, draws.acceptance_rate))
    return pd.DataFrame(rows, columns=["parameter", "inefficiency_factor", "degenerate", "acceptance_rate"])


def write_chain_summary(draws: PosteriorDraws, file_name: str) -> None:
    """
    Write every traced parameter in long format, one (parameter, iteration, value) row per draw.
    """

    frames = [
        pd.DataFrame({"parameter": name, "iteration": np.arange(chain.size), "value": chain})
        for name, chain in draws.traces().items()
    ]
    frame = pd.concat(frames, ignore_index=True)
    write_table(frame, file_name)


def write_diagnostics(draws: PosteriorDraws, file_name: str) -> None:
    write_table(diagnostics_table(draws), file_name)
