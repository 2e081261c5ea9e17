"""GPS L1 C/A coarse-acquisition Gold codes.

Two 10-stage maximal LFSRs: G1 feeds back taps 3 and 10, G2 feeds back
taps 2, 3, 6, 8, 9 and 10 (1-indexed), both seeded with all ones.  Each
PRN selects two G2 stages whose XOR is delayed G2; the code chip is
G1[10] XOR G2i.  Period 1023.
"""

from __future__ import annotations

import numpy as np

CODE_LENGTH = 1023

# Phase-select stage pairs for PRN 1..32.
_PHASE_TAPS = {
    1: (2, 6), 2: (3, 7), 3: (4, 8), 4: (5, 9), 5: (1, 9),
    6: (2, 10), 7: (1, 8), 8: (2, 9), 9: (3, 10), 10: (2, 3),
    11: (3, 4), 12: (5, 6), 13: (6, 7), 14: (7, 8), 15: (8, 9),
    16: (9, 10), 17: (1, 4), 18: (2, 5), 19: (3, 6), 20: (4, 7),
    21: (5, 8), 22: (6, 9), 23: (1, 3), 24: (4, 6), 25: (5, 7),
    26: (6, 8), 27: (7, 9), 28: (8, 10), 29: (1, 6), 30: (2, 7),
    31: (3, 8), 32: (4, 9),
}


def generate_ca_code(prn: int) -> np.ndarray:
    """Return the length-1023 C/A chip sequence for a PRN in 1..32.

    Chips are mapped 0 -> +1 and 1 -> -1 (int8), so the sequence is ready
    for direct multiplication onto a carrier.
    """
    if prn not in _PHASE_TAPS:
        raise ValueError(f"prn must be in 1..32, got {prn}")
    s1, s2 = _PHASE_TAPS[prn]

    g1 = np.ones(10, dtype=np.int64)
    g2 = np.ones(10, dtype=np.int64)
    bits = np.empty(CODE_LENGTH, dtype=np.int64)
    for i in range(CODE_LENGTH):
        bits[i] = g1[9] ^ (g2[s1 - 1] ^ g2[s2 - 1])
        fb1 = g1[2] ^ g1[9]
        fb2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9]
        g1[1:] = g1[:-1]
        g1[0] = fb1
        g2[1:] = g2[:-1]
        g2[0] = fb2
    return (1 - 2 * bits).astype(np.int8)
