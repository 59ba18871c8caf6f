"""Pure-numpy implementations of the hot kernels.

Kept operation-for-operation in step with the compiled versions: distances
are expanded per axis with the same association, and observation terms are
added in observation order, so the loss kernel matches the compiled one
bitwise on IEEE hardware.
"""

import numpy as np


def tdoa_loss_points(points, antennas, obs_antenna, obs_reference, measured, inv_speed):
    """Sum-of-squared-residual loss of TDoA observations at many candidate points.

    Parameters
    ----------
    points : (P, 3) float64, candidate positions.
    antennas : (M, 3) float64, antenna positions.
    obs_antenna, obs_reference : (K,) integer indices into ``antennas``.
    measured : (K,) float64, measured delay differences in seconds.
    inv_speed : float, reciprocal of the propagation speed.

    Returns
    -------
    (P,) float64 loss values.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    antennas = np.ascontiguousarray(antennas, dtype=np.float64)
    obs_antenna = np.asarray(obs_antenna, dtype=np.intp)
    obs_reference = np.asarray(obs_reference, dtype=np.intp)
    measured = np.asarray(measured, dtype=np.float64)

    n_points = points.shape[0]
    n_ant = antennas.shape[0]
    dist = np.empty((n_ant, n_points))
    for m in range(n_ant):
        dx = points[:, 0] - antennas[m, 0]
        dy = points[:, 1] - antennas[m, 1]
        dz = points[:, 2] - antennas[m, 2]
        dist[m] = np.sqrt(dx * dx + dy * dy + dz * dz)

    loss = np.zeros(n_points)
    for k in range(measured.shape[0]):
        expected = (dist[obs_antenna[k]] - dist[obs_reference[k]]) * inv_speed
        resid = measured[k] - expected
        loss += resid * resid
    return loss


def dirichlet_cir(n_fft, centers, gains):
    """Band-limited periodic impulse response with taps at fractional sample offsets.

    Each tap contributes gain * K(n - center) where K is the length-N periodic
    interpolation kernel

        K(x) = sin(pi r) / (N sin(pi r / N)) * exp(1j pi r (N - 1) / N),
        r = x - N round(x / N),   K(0) = 1.

    Taps are accumulated in the order given.
    """
    centers = np.asarray(centers, dtype=np.float64)
    gains = np.asarray(gains, dtype=np.complex128)
    n = np.arange(n_fft, dtype=np.float64)
    h = np.zeros(n_fft, dtype=np.complex128)
    for c, g in zip(centers, gains):
        x = n - c
        r = x - n_fft * np.rint(x / n_fft)
        num = np.sin(np.pi * r)
        den = n_fft * np.sin(np.pi * r / n_fft)
        phase = np.exp(1j * (np.pi * r * (n_fft - 1) / n_fft))
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.where(r == 0.0, 1.0 + 0.0j, num / den * phase)
        h += g * k
    return h
