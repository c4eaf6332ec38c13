"""Check the three optimality conditions exactly on a small two-factor process."""

import numpy as np

from infogcl.graph import Graph
from infogcl.infomeasure import verify_corollary1, verify_corollary2, verify_corollary3
from infogcl.synthetic import drop_nuisance, two_factor_process


def keep_even(g):
    a = np.array(g.attributes)
    a[1::2, 1] = 0.0
    return Graph(g.adjacency, a)


def keep_odd(g):
    a = np.array(g.attributes)
    a[0::2, 1] = 0.0
    return Graph(g.adjacency, a)


process = two_factor_process(nuisance_bits=2, relevant_bits=0)

r1 = verify_corollary1(process, {"keep-all": lambda g: g, "drop-nuisance": drop_nuisance})
print("views:", r1.optimum, "co-optima", r1.co_optima)
for pair in r1.pairs:
    a, b = pair.views
    print(f"  {a:>13} / {b:<13}", " ".join(f"{k}={v:.3f}" for k, v in sorted(pair.regions.items())))

r2 = verify_corollary2(process, keep_even, keep_odd, {
    "identity": lambda v: v,
    "keep-shared-bits": drop_nuisance,
    "constant": lambda v: 0,
})
print("encoder:", r2.optimum)

r3 = verify_corollary3(process, keep_even, keep_odd, {
    "identity": lambda z: z,
    "edge-count": lambda z: z.edge_count,
    "constant": lambda z: 0,
})
print("aggregation ranking:", r3.ranking)
