"""Regenerate the frozen full-ED reference from the brute-force oracle.

Run from the tests directory: python3 golden/make_golden.py
"""

import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
from oracles import full_loop  # noqa: E402

N, GAMMA0, OMEGA = 12, 1.0, 1.0
PHI = ETA = math.pi / 50


def main():
    h = full_loop(N, GAMMA0, OMEGA, PHI, ETA)
    w, v = np.linalg.eig(h)
    v = v / np.linalg.norm(v, axis=0)
    weight = np.sum(np.abs(v[:N]) ** 2, axis=0)
    pool = np.flatnonzero(weight > 0.5)
    pick = pool[np.argsort(-w[pool].imag)][:6]
    data = {
        "params": {"n_sites": N, "gamma0": GAMMA0, "omega": OMEGA, "phi": PHI, "eta": ETA},
        "dimension": int(h.shape[0]),
        "trace": [float(np.trace(h).real), float(np.trace(h).imag)],
        "subradiant": [[float(w[i].real), float(w[i].imag), float(weight[i])] for i in pick],
    }
    out = Path(__file__).with_name("full_ed_n12.json")
    out.write_text(json.dumps(data, indent=2) + "\n")


if __name__ == "__main__":
    main()
