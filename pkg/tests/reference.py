from linglam.entities import LingLamGraph
from linglam.graph import build_graph

# Latent coefficients of the four-latent reference structure.
ALPHA = 1.2  # L1 -> L2
BETA = 0.8  # L1 -> L3
SIGMA = 1.5  # L2 -> L3

# Loadings of X1..X4 on L1 (a) and L2 (b); any two rows are linearly independent.
A = (1.0, 2.0, 3.0, 1.7)
B = (1.0, 1.0, 2.0, -0.6)


def make_reference_graph() -> LingLamGraph:
    edges = [
        ("L1", "L2", ALPHA),
        ("L1", "L3", BETA),
        ("L2", "L3", SIGMA),
        ("L1", "L4", 0.7),
        ("L2", "L4", -1.1),
        ("L3", "L4", 0.9),
        ("L3", "X5", 1.3),
        ("L3", "X6", -0.9),
        ("L4", "X7", 1.1),
        ("L4", "X8", 0.75),
    ]
    for i in range(4):
        edges.append(("L1", f"X{i + 1}", A[i]))
        edges.append(("L2", f"X{i + 1}", B[i]))
    return build_graph(["L1", "L2", "L3", "L4"], [f"X{i}" for i in range(1, 9)], edges)
