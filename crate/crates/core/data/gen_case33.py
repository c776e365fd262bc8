"""Regenerates case33.json from the 33-bus radial feeder branch and load data.

Admittances are per unit on a 12.66 kV / 10 MVA base with g + jb = 1 / (r + jx).
The reference state comes from a backward/forward sweep load flow.
"""

import json
import sys

import numpy as np

BASE_KV = 12.66
BASE_MVA = 10.0

# from, to, r [ohm], x [ohm]
BRANCHES = [
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864),
    (4, 5, 0.3811, 0.1941), (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188),
    (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400), (9, 10, 1.0440, 0.7400),
    (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450),
    (16, 17, 1.2890, 1.7210), (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565),
    (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784), (21, 22, 0.7089, 0.9373),
    (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337),
    (28, 29, 0.8042, 0.7006), (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630),
    (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
]

# bus: (kW, kvar)
LOADS = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20), 7: (200, 100),
    8: (200, 100), 9: (60, 20), 10: (60, 20), 11: (45, 30), 12: (60, 35), 13: (60, 35),
    14: (120, 80), 15: (60, 10), 16: (60, 20), 17: (60, 20), 18: (90, 40), 19: (90, 40),
    20: (90, 40), 21: (90, 40), 22: (90, 40), 23: (90, 50), 24: (420, 200), 25: (420, 200),
    26: (60, 25), 27: (60, 25), 28: (60, 20), 29: (120, 70), 30: (200, 600), 31: (150, 70),
    32: (210, 100), 33: (60, 40),
}


def load_flow(n, z):
    s = np.zeros(n + 1, dtype=complex)
    for bus, (p, q) in LOADS.items():
        s[bus] = (p + 1j * q) / (BASE_MVA * 1000.0)
    v = np.ones(n + 1, dtype=complex)
    for _ in range(100):
        i_load = np.conj(s / v)
        i_branch = {}
        for f, t, _, _ in reversed(BRANCHES):
            i_branch[(f, t)] = i_load[t] + sum(i_branch[(a, b)] for (a, b) in i_branch if a == t)
        v_new = v.copy()
        for f, t, _, _ in BRANCHES:
            v_new[t] = v_new[f] - z[(f, t)] * i_branch[(f, t)]
        if np.max(np.abs(v_new - v)) < 1e-14:
            v = v_new
            break
        v = v_new
    return np.abs(v[1:]), np.angle(v[1:])


def main():
    z_base = BASE_KV ** 2 / BASE_MVA
    z = {(f, t): (r + 1j * x) / z_base for f, t, r, x in BRANCHES}
    edges = []
    for f, t, r, x in BRANCHES:
        y = 1.0 / z[(f, t)]
        edges.append({"i": f, "j": t, "r": r, "x": x, "g": y.real, "b": y.imag})
    v, theta = load_flow(33, z)
    case = {
        "schema": "multisweep-grid/1",
        "name": "case33",
        "description": "33-bus radial distribution feeder; r, x in ohm; g, b = 1/(r + jx) in p.u. "
        "on a 12.66 kV, 10 MVA base; truth from a load flow with the standard bus loads; "
        "v in p.u., theta in rad",
        "base_kv": BASE_KV,
        "base_mva": BASE_MVA,
        "n_bus": 33,
        "edges": edges,
        "truth": {"v": list(v), "theta": list(theta)},
        "noise": json.loads(sys.argv[1]) if len(sys.argv) > 1 else None,
        "weights": json.loads(sys.argv[2]) if len(sys.argv) > 2 else None,
    }
    json.dump(case, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
