"""Choi-Williams time-frequency analysis and spectrogram images.

The distribution is computed in the time-lag domain.  For each retained
frame n and lag m the exponentially weighted local autocorrelation is

    R(n, m) = sum_mu K(mu, m) x(n + mu + m) conj(x(n + mu - m))

with K a Gaussian in mu whose width grows linearly with |m| (scale
sigma), degenerating to a delta at m = 0.  A DFT over the lag axis gives
the frequency profile of each frame; the result is real up to roundoff
because R(n, -m) = conj(R(n, m)) by construction.

Because the products use lag pairs (+m, -m), a tone at f lands at bin
round(2 f M / fs) mod M: the axis spans [0, fs/2) in M bins and content
above fs/2 aliases down.  That halving is inherent to the bilinear form.

Two departures from the textbook sampling are deliberate: the Gaussian
is truncated at 1e-4 of its per-lag peak, and the truncated kernel is
renormalized to unit mass over the samples that actually fall inside the
capture.  Unit mass keeps the sigma -> inf limit an exact Wigner-Ville
(one tap of weight 1) and keeps edge frames unbiased instead of fading,
so a constant signal is flat across all frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signals import ComplexSignal

_TRUNCATION = 1e-4


@dataclass(frozen=True)
class CwdConfig:
    sigma: float = 1.0
    lag_half_length: int = 64
    time_frames: int = 128
    freq_bins: int = 128

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.lag_half_length < 1:
            raise ValueError(f"lag_half_length must be >= 1, got {self.lag_half_length}")
        if self.freq_bins != 2 * self.lag_half_length:
            raise ValueError(
                f"freq_bins must equal 2 * lag_half_length ({2 * self.lag_half_length}), got {self.freq_bins}")
        if self.time_frames < 1:
            raise ValueError(f"time_frames must be >= 1, got {self.time_frames}")


def frame_indices(n: int, frames: int) -> np.ndarray:
    """Uniformly decimated sample indices covering the capture."""
    return (np.arange(frames) * n) // frames


def cwd_frequencies(cfg: CwdConfig, fs: float) -> np.ndarray:
    """Center frequency of each output bin, ascending from 0 to fs/2."""
    m = cfg.freq_bins
    return np.arange(m) * fs / (2 * m)


def _lag_taper(cfg: CwdConfig) -> np.ndarray:
    """Hamming taper over lags, symmetric in m and 1 at m = 0.

    Indexed in DFT order (m mod 2L); on this grid the taper is DFT-even,
    so a flat autocorrelation transforms to exactly three bins.
    """
    L = cfg.lag_half_length
    m = np.arange(2 * L)
    m = np.where(m > L, m - 2 * L, m)
    return 0.54 + 0.46 * np.cos(np.pi * m / L)


def cwd_complex(sig: ComplexSignal, cfg: CwdConfig | None = None) -> np.ndarray:
    """The distribution before its imaginary residue is discarded.

    Returns (time_frames, freq_bins) complex; max |imag| stays below
    1e-6 of max |real| because the lag array is kept exactly Hermitian,
    including a real-forced unpaired Nyquist lag.
    """
    if cfg is None:
        cfg = CwdConfig()
    x = sig.samples
    n = x.size
    L = cfg.lag_half_length
    if n < 2 * L:
        raise ValueError(f"signal length {n} is shorter than 2 * lag_half_length = {2 * L}")

    frames = frame_indices(n, cfg.time_frames)
    taper = _lag_taper(cfg)
    lag = np.zeros((cfg.time_frames, 2 * L), dtype=np.complex128)

    # m = 0: the kernel is a delta, so this is instantaneous power.
    lag[:, 0] = (x.real**2 + x.imag**2)[frames]

    halfspan = 2.0 * math.sqrt(math.log(1.0 / _TRUNCATION) / cfg.sigma)
    for m in range(1, L + 1):
        hw = int(halfspan * m)
        mu = np.arange(-hw, hw + 1)
        kern = np.exp(-(cfg.sigma * mu.astype(np.float64) ** 2) / (4.0 * m * m))

        ip = frames[:, None] + mu[None, :] + m
        iq = ip - 2 * m
        valid = (iq >= 0) & (ip < n)
        prod = x[np.clip(ip, 0, n - 1)] * np.conj(x[np.clip(iq, 0, n - 1)])
        prod[~valid] = 0.0

        mass = valid.astype(np.float64) @ kern
        acc = prod @ kern
        r = np.divide(acc, mass, out=np.zeros_like(acc), where=mass > 0)

        lag[:, m] = taper[m] * r
        if m < L:
            lag[:, 2 * L - m] = np.conj(lag[:, m])
    # The m = L lag has no -L partner; forcing it real keeps the DFT real.
    lag[:, L] = lag[:, L].real

    return np.fft.fft(lag, axis=1)


def cwd(sig: ComplexSignal, cfg: CwdConfig | None = None) -> np.ndarray:
    """Real Choi-Williams distribution, shape (time_frames, freq_bins)."""
    return cwd_complex(sig, cfg).real


@dataclass
class Spectrogram:
    """A normalized time-frequency image ready for the classifier.

    pixels is float32, shape (freq_bins, time_frames), frequency rows
    ascending from 0, every value in [0, 1].
    """

    pixels: np.ndarray
    label: int
    meta: dict = field(default_factory=dict)


def to_spectrogram(tf: np.ndarray, label: int, meta: dict | None = None) -> Spectrogram:
    """Magnitude, log(1 + v) compression, per-image min-max to [0, 1].

    A constant distribution cannot be normalized; it maps to all-zero
    pixels with meta["degenerate"] = True.
    """
    meta = dict(meta) if meta else {}
    v = np.log1p(np.abs(np.asarray(tf, dtype=np.float64)))
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        pixels = np.zeros(v.T.shape, dtype=np.float32)
        meta["degenerate"] = True
    else:
        pixels = ((v - lo) / (hi - lo)).T.astype(np.float32)
        meta.setdefault("degenerate", False)
    return Spectrogram(pixels=pixels, label=int(label), meta=meta)


def write_pgm(path, pixels: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255), pixel = round(255 * v), row-major."""
    h, w = pixels.shape
    data = np.round(255.0 * np.asarray(pixels, dtype=np.float64)).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def write_raw_f32(path, pixels: np.ndarray) -> None:
    """Raw little-endian float32 grid, row-major, no header."""
    with open(path, "wb") as f:
        f.write(np.asarray(pixels, dtype="<f4").tobytes())
