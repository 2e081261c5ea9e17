"""Complex-baseband signal synthesis for the jamming lab.

One capture is n samples at rate fs of r = s + j + w: a spread-spectrum
ranging signal s, a compound jammer j built from two of five families,
and circularly symmetric white Gaussian noise w.  All generators take an
explicit sample count, sample rate and (where stochastic) an Rng, and
are bit-deterministic given those.

Jammer families and their free parameters:

  STJ   single tone              fc, phase
  MTJ   normalized tone sum      tones [(power, freq, phase), ...]
  PBNJ  band-limited noise       fc (band center), bandwidth
  LFMJ  sawtooth chirp           fc, sweep width (bandwidth), sweep period, phase
  PPNJ  rectangular pulse train  pulse period, pulse width

Every family is emitted at (or normalized to) unit average power; the
compound mixer and the capture synthesizer own all power bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cacode import CODE_LENGTH, generate_ca_code
from .rng import Rng

DEFAULT_FS = 15.36e6
DEFAULT_N = 1024

STJ, MTJ, PBNJ, LFMJ, PPNJ = "STJ", "MTJ", "PBNJ", "LFMJ", "PPNJ"
JAMMER_KINDS = (STJ, MTJ, PBNJ, LFMJ, PPNJ)

# Ordered two-family combinations, excluding (STJ, MTJ); index = class id.
COMPOUND_PAIRS = (
    (STJ, PBNJ), (STJ, LFMJ), (STJ, PPNJ),
    (MTJ, PBNJ), (MTJ, LFMJ), (MTJ, PPNJ),
    (PBNJ, LFMJ), (PBNJ, PPNJ), (LFMJ, PPNJ),
)
CLASS_FOR_PAIR = {pair: i for i, pair in enumerate(COMPOUND_PAIRS)}
NUM_CLASSES = len(COMPOUND_PAIRS)


@dataclass(frozen=True)
class ComplexSignal:
    """A finite complex-baseband capture: 1-D complex samples plus rate."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.ndim != 1 or s.size == 0:
            raise ValueError(f"samples must be a non-empty 1-D array, got shape {s.shape}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", s)


@dataclass(frozen=True)
class GnssParams:
    """Ranging-signal parameters; defaults model a nominal acquisition."""

    carrier_power: float = 1.0
    prn: int = 1
    doppler_hz: float = 1000.0
    carrier_phase_rad: float = math.pi / 4
    code_delay_s: float = 0.0
    cn0_dbhz: float = 40.0
    data_rate_bps: float = 50.0
    code_rate_cps: float = 1.023e6

    def __post_init__(self):
        if self.carrier_power <= 0:
            raise ValueError(f"carrier_power must be positive, got {self.carrier_power}")
        if self.cn0_dbhz <= 0:
            raise ValueError(f"cn0_dbhz must be positive, got {self.cn0_dbhz}")


@dataclass(frozen=True)
class JammerSpec:
    """Parameters for one jammer; which fields matter depends on kind.

    tones entries are (power, freq_hz, phase_rad).  For PBNJ fc_hz is the
    band center.  For LFMJ bandwidth_hz is the sweep width and
    sweep_period_s the sawtooth period.  PPNJ keys off pulse_period_s and
    pulse_width_s only; its fc_hz/phase_rad/bandwidth_hz are carried as
    metadata and do not shape the waveform.
    """

    kind: str
    fc_hz: float = 0.0
    phase_rad: float = 0.0
    tones: tuple = ()
    bandwidth_hz: float = 0.0
    sweep_period_s: float = 0.0
    pulse_period_s: float = 0.0
    pulse_width_s: float = 0.0

    def __post_init__(self):
        if self.kind not in JAMMER_KINDS:
            raise ValueError(f"unknown jammer kind {self.kind!r}, expected one of {JAMMER_KINDS}")
        if self.kind == MTJ:
            if len(self.tones) < 2:
                raise ValueError(f"MTJ needs at least 2 tones, got {len(self.tones)}")
            freqs = [t[1] for t in self.tones]
            if len(set(freqs)) != len(freqs):
                raise ValueError(f"MTJ tone frequencies must be distinct, got {freqs}")
            if any(t[0] <= 0 for t in self.tones):
                raise ValueError("MTJ tone powers must be positive")
        if self.kind == PBNJ and self.bandwidth_hz <= 0:
            raise ValueError(f"PBNJ bandwidth must be positive, got {self.bandwidth_hz}")
        if self.kind == LFMJ:
            if self.bandwidth_hz <= 0 or self.sweep_period_s <= 0:
                raise ValueError("LFMJ needs positive bandwidth_hz and sweep_period_s")
        if self.kind == PPNJ:
            if self.pulse_period_s <= 0:
                raise ValueError(f"PPNJ pulse_period_s must be positive, got {self.pulse_period_s}")
            if not 0 < self.pulse_width_s <= self.pulse_period_s:
                raise ValueError("PPNJ pulse_width_s must be in (0, pulse_period_s]")


@dataclass(frozen=True)
class CompoundSpec:
    """An ordered pair of jammers mixed at a power ratio pr_db = P2/P1."""

    first: JammerSpec
    second: JammerSpec
    pr_db: float = 0.0
    class_id: int = field(default=-1)

    def __post_init__(self):
        pair = (self.first.kind, self.second.kind)
        if pair not in CLASS_FOR_PAIR:
            raise ValueError(f"unsupported compound pair {pair}; valid pairs: {COMPOUND_PAIRS}")
        expected = CLASS_FOR_PAIR[pair]
        if self.class_id == -1:
            object.__setattr__(self, "class_id", expected)
        elif self.class_id != expected:
            raise ValueError(f"class_id {self.class_id} does not match pair {pair} (expected {expected})")


def _time_base(n: int, fs: float) -> np.ndarray:
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    if fs <= 0:
        raise ValueError(f"sample rate must be positive, got {fs}")
    return np.arange(n) / fs


def average_power(sig: ComplexSignal) -> float:
    """Mean |x|^2 over the capture."""
    s = sig.samples
    return float(np.mean(s.real**2 + s.imag**2))


def unit_normalize(sig: ComplexSignal) -> ComplexSignal:
    """Scale to unit total energy (sum |x|^2 = 1)."""
    e = float(np.sum(sig.samples.real**2 + sig.samples.imag**2))
    if e == 0.0:
        raise ValueError("cannot normalize an all-zero signal")
    return ComplexSignal(sig.samples / math.sqrt(e), sig.sample_rate_hz)


def generate_gnss_signal(params: GnssParams, n: int = DEFAULT_N, fs: float = DEFAULT_FS,
                         rng: Rng | None = None) -> ComplexSignal:
    """Spreading code times data bits on a residual carrier.

    s[m] = sqrt(2C) d(t-tau) c(t-tau) exp(j(2 pi f0 t + phi0)) with the
    code and data indexed by the most recent chip/bit boundary (floor).
    Data bits are iid +-1 drawn from rng; one 66 us capture normally sees
    a single bit.
    """
    if rng is None:
        rng = Rng(0)
    t = _time_base(n, fs)
    shifted = t - params.code_delay_s

    chip_idx = np.floor(shifted * params.code_rate_cps).astype(np.int64) % CODE_LENGTH
    chips = generate_ca_code(params.prn)[chip_idx].astype(np.float64)

    bit_idx = np.floor(shifted * params.data_rate_bps).astype(np.int64)
    lo = int(bit_idx.min())
    bits = rng.integers(0, 2, int(bit_idx.max()) - lo + 1) * 2 - 1
    data = bits[bit_idx - lo].astype(np.float64)

    carrier = np.exp(1j * (2 * np.pi * params.doppler_hz * t + params.carrier_phase_rad))
    samples = math.sqrt(2 * params.carrier_power) * data * chips * carrier
    return ComplexSignal(samples, fs)


def _tone_sum(tones, n: int, fs: float) -> np.ndarray:
    """Power-weighted sum of complex tones, normalized by sqrt(total power)."""
    t = _time_base(n, fs)
    total = sum(p for p, _, _ in tones)
    acc = np.zeros(n, dtype=np.complex128)
    for p, f, ph in tones:
        acc += math.sqrt(p) * np.exp(1j * (2 * np.pi * f * t + ph))
    return acc / math.sqrt(total)


def gen_stj(spec: JammerSpec, n: int = DEFAULT_N, fs: float = DEFAULT_FS) -> ComplexSignal:
    """Single-tone jammer: unit-modulus complex exponential at fc."""
    _expect_kind(spec, STJ)
    return ComplexSignal(_tone_sum(((1.0, spec.fc_hz, spec.phase_rad),), n, fs), fs)


def gen_mtj(spec: JammerSpec, n: int = DEFAULT_N, fs: float = DEFAULT_FS) -> ComplexSignal:
    """Multi-tone jammer; tone powers are normalized so the nominal
    (infinite-horizon) average power is 1.  Over a finite capture the
    measured power wobbles with the pairwise beat terms."""
    _expect_kind(spec, MTJ)
    return ComplexSignal(_tone_sum(spec.tones, n, fs), fs)


def gen_pbnj(spec: JammerSpec, n: int = DEFAULT_N, fs: float = DEFAULT_FS,
             rng: Rng | None = None) -> ComplexSignal:
    """Partial-band noise: brick-wall filtered complex white noise moved
    to the band center, exactly normalized to unit average power."""
    _expect_kind(spec, PBNJ)
    if spec.bandwidth_hz > fs:
        raise ValueError(f"PBNJ bandwidth {spec.bandwidth_hz} exceeds sample rate {fs}")
    if rng is None:
        rng = Rng(0)
    t = _time_base(n, fs)
    noise = rng.normal(size=n) + 1j * rng.normal(size=n)
    spectrum = np.fft.fft(noise)
    mask = np.abs(np.fft.fftfreq(n, 1.0 / fs)) <= spec.bandwidth_hz / 2
    shaped = np.fft.ifft(spectrum * mask) * np.exp(2j * np.pi * spec.fc_hz * t)
    power = np.mean(shaped.real**2 + shaped.imag**2)
    if power == 0.0:
        raise ValueError("PBNJ produced an empty band; bandwidth too small for this capture")
    return ComplexSignal(shaped / math.sqrt(power), fs)


def gen_lfmj(spec: JammerSpec, n: int = DEFAULT_N, fs: float = DEFAULT_FS) -> ComplexSignal:
    """Linear FM chirp sweeping bandwidth_hz over each sweep period,
    phase restarting at every period boundary (sawtooth sweep)."""
    _expect_kind(spec, LFMJ)
    t = np.mod(_time_base(n, fs), spec.sweep_period_s)
    q = spec.bandwidth_hz / spec.sweep_period_s
    phase = 2 * np.pi * spec.fc_hz * t + np.pi * q * t * t + spec.phase_rad
    return ComplexSignal(np.exp(1j * phase), fs)


def gen_ppnj(spec: JammerSpec, n: int = DEFAULT_N, fs: float = DEFAULT_FS) -> ComplexSignal:
    """Periodic pulse train: amplitude sqrt(T/tau) on a width-tau support
    centered in each period, zero elsewhere, then exactly power-normalized.

    The support test runs in sample units (exact integers modulo the
    period) with the right edge excluded, so sample-aligned specs
    quantize to exactly the tau/T on-fraction and keep the nominal
    sqrt(T/tau) amplitude to within float rounding.
    """
    _expect_kind(spec, PPNJ)
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    if fs <= 0:
        raise ValueError(f"sample rate must be positive, got {fs}")
    T, tau = spec.pulse_period_s, spec.pulse_width_s
    period = T * fs
    width = tau * fs
    if width >= period:
        on = np.ones(n, dtype=bool)
    else:
        u = np.mod(np.arange(n, dtype=np.float64), period)
        # Half an ulp of jitter at a sample-aligned edge must not flip it;
        # eta is far above the mod roundoff and far below one sample.
        eta = 1e-9
        on = (u >= (period - width) / 2 - eta) & (u < (period + width) / 2 - eta)
    samples = np.where(on, math.sqrt(T / tau), 0.0).astype(np.complex128)
    power = np.mean(samples.real**2)
    if power == 0.0:
        raise ValueError("PPNJ pulse support contains no samples at this rate")
    return ComplexSignal(samples / math.sqrt(power), fs)


def gen_jammer(spec: JammerSpec, n: int = DEFAULT_N, fs: float = DEFAULT_FS,
               rng: Rng | None = None) -> ComplexSignal:
    """Dispatch on spec.kind.  Only PBNJ consumes randomness."""
    if spec.kind == STJ:
        return gen_stj(spec, n, fs)
    if spec.kind == MTJ:
        return gen_mtj(spec, n, fs)
    if spec.kind == PBNJ:
        return gen_pbnj(spec, n, fs, rng)
    if spec.kind == LFMJ:
        return gen_lfmj(spec, n, fs)
    return gen_ppnj(spec, n, fs)


def _expect_kind(spec: JammerSpec, kind: str) -> None:
    if spec.kind != kind:
        raise ValueError(f"expected a {kind} spec, got {spec.kind}")


def compose_compound(a: ComplexSignal, b: ComplexSignal, pr_db: float) -> ComplexSignal:
    """Mix two unit-power jammers as alpha*a + beta*b.

    beta^2/alpha^2 = 10^(pr_db/10) and alpha^2 + beta^2 = 1, so the mix
    itself has unit nominal power and the pair power ratio is exact by
    construction.
    """
    if a.samples.shape != b.samples.shape:
        raise ValueError(f"component length mismatch: {a.samples.shape} vs {b.samples.shape}")
    if a.sample_rate_hz != b.sample_rate_hz:
        raise ValueError(f"component rate mismatch: {a.sample_rate_hz} vs {b.sample_rate_hz}")
    for name, sig in (("first", a), ("second", b)):
        p = average_power(sig)
        if abs(p - 1.0) > 0.1:
            raise ValueError(f"{name} component is not power-normalized (measured {p:.4f})")
    rho = 10.0 ** (pr_db / 10.0)
    alpha = math.sqrt(1.0 / (1.0 + rho))
    beta = math.sqrt(rho / (1.0 + rho))
    return ComplexSignal(alpha * a.samples + beta * b.samples, a.sample_rate_hz)


def mixing_gains(pr_db: float) -> tuple[float, float]:
    """The (alpha, beta) used by compose_compound for a given ratio."""
    rho = 10.0 ** (pr_db / 10.0)
    return math.sqrt(1.0 / (1.0 + rho)), math.sqrt(rho / (1.0 + rho))


def noise_power(params: GnssParams, fs: float = DEFAULT_FS) -> float:
    """Total noise power implied by the carrier-to-noise density: the
    capture is full-band, so P_N = C * fs / 10^(cn0/10)."""
    return params.carrier_power * fs / 10.0 ** (params.cn0_dbhz / 10.0)


@dataclass(frozen=True)
class ReceivedParts:
    """A synthesized capture with its three addends kept separate."""

    received: ComplexSignal
    gnss: ComplexSignal
    jamming: ComplexSignal
    noise: ComplexSignal


def synthesize_received_parts(gnss: GnssParams, jam: CompoundSpec, jnr_db: float,
                              n: int = DEFAULT_N, fs: float = DEFAULT_FS,
                              rng: Rng | None = None) -> ReceivedParts:
    """Full capture r = s + j + w with the jamming power set numerically.

    The compound is composed at jam.pr_db, its realized power measured on
    the composed samples, then rescaled so measured P_J / P_N hits jnr_db
    exactly.  Draw order is fixed: data bits, first jammer, second
    jammer, then AWGN, so a single seed pins the whole capture.
    """
    if rng is None:
        rng = Rng(0)
    s = generate_gnss_signal(gnss, n, fs, rng)
    j1 = gen_jammer(jam.first, n, fs, rng)
    j2 = gen_jammer(jam.second, n, fs, rng)
    composed = compose_compound(j1, j2, jam.pr_db)

    pn = noise_power(gnss, fs)
    target_pj = pn * 10.0 ** (jnr_db / 10.0)
    realized = average_power(composed)
    jam_scaled = composed.samples * math.sqrt(target_pj / realized)

    sigma = math.sqrt(pn / 2.0)
    w = sigma * (rng.normal(size=n) + 1j * rng.normal(size=n))

    received = s.samples + jam_scaled + w
    return ReceivedParts(
        received=ComplexSignal(received, fs),
        gnss=s,
        jamming=ComplexSignal(jam_scaled, fs),
        noise=ComplexSignal(w, fs),
    )


def synthesize_received(gnss: GnssParams, jam: CompoundSpec, jnr_db: float,
                        n: int = DEFAULT_N, fs: float = DEFAULT_FS,
                        rng: Rng | None = None) -> ComplexSignal:
    return synthesize_received_parts(gnss, jam, jnr_db, n, fs, rng).received
