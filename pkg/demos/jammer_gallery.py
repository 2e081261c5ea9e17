"""Spectrogram gallery: every jammer family and all nine compound classes.

Synthesizes one capture per jammer family, then one capture per compound
class at a fixed JNR, and writes each Choi-Williams spectrogram as a PGM
next to this script.  Along the way it prints the power bookkeeping so
the JNR definition (jamming power over in-band noise power) is visible
on real numbers.

Run:  python3 demos/jammer_gallery.py [--out DIR] [--jnr DB]
"""

import argparse
import math
import os

from jamforge import (
    COMPOUND_PAIRS,
    CompoundSpec,
    CwdConfig,
    GnssParams,
    JammerSpec,
    Rng,
    average_power,
    cwd,
    gen_jammer,
    noise_power,
    synthesize_received_parts,
    to_spectrogram,
    write_pgm,
)

FS = 15.36e6
N = 1024

# One representative of each family, parameters chosen to be easy to
# spot on a 128x128 image: tones in distinct bands, a 4 MHz chirp, a
# quarter-duty pulse train.
FAMILY_SPECS = {
    "STJ": JammerSpec("STJ", fc_hz=2.0e6),
    "MTJ": JammerSpec("MTJ", tones=((1.0, 1.0e6, 0.0), (1.0, 3.0e6, 1.0), (0.5, 5.0e6, 2.0))),
    "PBNJ": JammerSpec("PBNJ", fc_hz=4.0e6, bandwidth_hz=1.5e6),
    "LFMJ": JammerSpec("LFMJ", fc_hz=1.0e6, bandwidth_hz=4.0e6, sweep_period_s=N / FS / 2),
    "PPNJ": JammerSpec("PPNJ", pulse_period_s=256 / FS, pulse_width_s=64 / FS),
}


def save_image(sig, cfg, path):
    image = to_spectrogram(cwd(sig, cfg), label=0)
    write_pgm(path, image.pixels)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "gallery"))
    ap.add_argument("--jnr", type=float, default=10.0)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    cfg = CwdConfig()
    gnss = GnssParams()

    print("== single families (unit power by construction) ==")
    for name, spec in FAMILY_SPECS.items():
        sig = gen_jammer(spec, N, FS, Rng(1))
        path = os.path.join(args.out, f"family_{name}.pgm")
        save_image(sig, cfg, path)
        print(f"{name:5s}  power {average_power(sig):.6f}  -> {path}")

    pn = noise_power(gnss, FS)
    print(f"\n== compound classes at JNR {args.jnr:+.0f} dB ==")
    print(f"in-band noise power P_N = {pn:.1f}")
    for class_id, (first, second) in enumerate(COMPOUND_PAIRS):
        compound = CompoundSpec(FAMILY_SPECS[first], FAMILY_SPECS[second], pr_db=0.0)
        parts = synthesize_received_parts(gnss, compound, args.jnr, N, FS, Rng(100 + class_id))
        path = os.path.join(args.out, f"class_{class_id}_{first}_{second}.pgm")
        save_image(parts.received, cfg, path)
        realized = 10.0 * math.log10(average_power(parts.jamming) / pn)
        print(f"class {class_id}  {first:4s}+{second:4s}  "
              f"P_J/P_N = {realized:+6.2f} dB  -> {path}")

    print(f"\nwrote {5 + len(COMPOUND_PAIRS)} images under {args.out}")


if __name__ == "__main__":
    main()
