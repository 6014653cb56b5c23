"""Writes data/ieee39.json, the 39-bus New England system (100 MVA base)."""
import json
import sys

LOADS = {3: (322, 2.4), 4: (500, 184), 7: (233.8, 84), 8: (522, 176), 12: (7.5, 88),
         15: (320, 153), 16: (329, 32.3), 18: (158, 30), 20: (628, 103), 21: (274, 115),
         23: (247.5, 84.6), 24: (308.6, -92.2), 25: (224, 47.2), 26: (139, 17),
         27: (281, 75.5), 28: (206, 27.6), 29: (283.5, 26.9), 31: (9.2, 4.6), 39: (1104, 250)}

BRANCHES = [
    (1, 2, .0035, .0411, .6987, 0), (1, 39, .001, .025, .75, 0), (2, 3, .0013, .0151, .2572, 0),
    (2, 25, .007, .0086, .146, 0), (2, 30, 0, .0181, 0, 1.025), (3, 4, .0013, .0213, .2214, 0),
    (3, 18, .0011, .0133, .2138, 0), (4, 5, .0008, .0128, .1342, 0), (4, 14, .0008, .0129, .1382, 0),
    (5, 6, .0002, .0026, .0434, 0), (5, 8, .0008, .0112, .1476, 0), (6, 7, .0006, .0092, .113, 0),
    (6, 11, .0007, .0082, .1389, 0), (6, 31, 0, .025, 0, 1.07), (7, 8, .0004, .0046, .078, 0),
    (8, 9, .0023, .0363, .3804, 0), (9, 39, .001, .025, 1.2, 0), (10, 11, .0004, .0043, .0729, 0),
    (10, 13, .0004, .0043, .0729, 0), (10, 32, 0, .02, 0, 1.07), (12, 11, .0016, .0435, 0, 1.006),
    (12, 13, .0016, .0435, 0, 1.006), (13, 14, .0009, .0101, .1723, 0), (14, 15, .0018, .0217, .366, 0),
    (15, 16, .0009, .0094, .171, 0), (16, 17, .0007, .0089, .1342, 0), (16, 19, .0016, .0195, .304, 0),
    (16, 21, .0008, .0135, .2548, 0), (16, 24, .0003, .0059, .068, 0), (17, 18, .0007, .0082, .1319, 0),
    (17, 27, .0013, .0173, .3216, 0), (19, 20, .0007, .0138, 0, 1.06), (19, 33, .0007, .0142, 0, 1.07),
    (20, 34, .0009, .018, 0, 1.009), (21, 22, .0008, .014, .2565, 0), (22, 23, .0006, .0096, .1846, 0),
    (22, 35, 0, .0143, 0, 1.025), (23, 24, .0022, .035, .361, 0), (23, 36, .0005, .0272, 0, 1.0),
    (25, 26, .0032, .0323, .531, 0), (25, 37, .0006, .0232, 0, 1.025), (26, 27, .0014, .0147, .2396, 0),
    (26, 28, .0043, .0474, .7802, 0), (26, 29, .0057, .0625, 1.029, 0), (28, 29, .0014, .0151, .249, 0),
    (29, 38, .0008, .0156, 0, 1.025),
]

# bus, P (MW), V set point, P max (MW), H (s), x'd (pu)
GENS = [
    (30, 250, 1.0499, 1040, 42.0, .031), (31, 573, .982, 646, 30.3, .0697),
    (32, 650, .9841, 725, 35.8, .0531), (33, 632, .9972, 652, 28.6, .0436),
    (34, 508, 1.0123, 508, 26.0, .132), (35, 650, 1.0494, 687, 34.8, .05),
    (36, 560, 1.0636, 580, 26.4, .049), (37, 540, 1.0275, 564, 24.3, .057),
    (38, 830, 1.0265, 865, 34.5, .057), (39, 1000, 1.03, 1100, 500.0, .006),
]
SLACK = 31


def main(path):
    base = 100.0
    gen_buses = {g[0] for g in GENS}
    buses = []
    for i in range(1, 40):
        kind = "Slack" if i == SLACK else ("PV" if i in gen_buses else "PQ")
        buses.append({"id": i, "type": kind, "base_kv": 345.0, "gs": 0.0, "bs": 0.0})
    branches = [{"from": f, "to": t, "r": r, "x": x, "b": b, "tap": tap or 1.0}
                for f, t, r, x, b, tap in BRANCHES]
    gens = []
    for bus, p, v, pmax, h, xd in GENS:
        gens.append({"bus": bus, "p": p / base, "v": v, "q_min": -5.0, "q_max": 8.0,
                     "p_min": round(min(0.5 * pmax, p) / base, 6), "p_max": pmax / base,
                     "h": h, "d": 0.0, "xd_prime": xd, "slack": bus == SLACK})
    loads = []
    for bus, (p, q) in sorted(LOADS.items()):
        p, q = p / base, q / base
        qa, qb = sorted((0.8 * q, 1.1 * q))
        loads.append({"bus": bus, "p": p, "q": q, "p_min": round(0.8 * p, 6), "p_max": round(1.1 * p, 6),
                      "q_min": round(qa, 6), "q_max": round(qb, 6)})
    case = {"name": "ieee39", "base_mva": base, "buses": buses, "branches": branches,
            "generators": gens, "loads": loads, "neural_devices": [],
            "config": {"power_flow_method": "newton", "integration_method": "trapezoidal",
                       "ordering": "min_degree", "frequency_hz": 50.0, "step": 0.01, "horizon": 10.0}}
    with open(path, "w") as f:
        json.dump(case, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/ieee39.json")
