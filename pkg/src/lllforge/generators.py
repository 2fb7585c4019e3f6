"""Random instance generators used by the tests, the benchmarks and the CLI."""
from __future__ import annotations

import random

from .adapters import CnfFormula, Hypergraph

# shape name -> (clause count, list of shared-variable edges between clause slots)
_SHAPES = {
    "single": (1, []),
    "pair": (2, [(0, 1)]),
    "path3": (3, [(0, 1), (1, 2)]),
    "triangle": (3, [(0, 1, 2)]),
    "star": (6, [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]),
    "clique6": (6, [(0, 1, 2, 3, 4, 5)]),
}

DEFAULT_MIX = {"single": 4, "pair": 4, "path3": 2, "triangle": 2, "star": 1}


def clustered_cnf(
    m: int,
    k: int = 8,
    rng: random.Random | None = None,
    mix: dict[str, int] | None = None,
    anchor: str = "star",
) -> CnfFormula:
    """A k-CNF made of disjoint clusters of clauses with shared variables.

    Each cluster is a shape from ``_SHAPES``; a shape edge ``(i, j, ...)``
    means those clause slots share one fresh variable.  The first cluster is
    ``anchor`` so the maximum degree is reached; no clause meets more than 5
    others.  Literal signs are uniform.
    """
    rng = rng or random.Random(0)
    mix = mix or DEFAULT_MIX
    names = list(mix)
    weights = [mix[s] for s in names]
    clauses: list[list[int]] = []
    next_var = 1
    first = True
    while len(clauses) < m:
        shape = anchor if first else rng.choices(names, weights)[0]
        first = False
        size, shared = _SHAPES[shape]
        if len(clauses) + size > m:
            shape, size, shared = "single", 1, []
        slots: list[list[int]] = [[] for _ in range(size)]
        for group in shared:
            for s in group:
                slots[s].append(next_var)
            next_var += 1
        for slot in slots:
            if len(slot) > k:
                raise ValueError(f"shape {shape} needs clauses wider than {k}")
            while len(slot) < k:
                slot.append(next_var)
                next_var += 1
            rng.shuffle(slot)
            clauses.append([v if rng.random() < 0.5 else -v for v in slot])
    return CnfFormula(next_var - 1, tuple(tuple(c) for c in clauses))


def random_sparse_cnf(m: int, k: int, num_vars: int, max_degree: int, rng: random.Random | None = None,
                      attempts: int = 10_000) -> CnfFormula:
    """Uniform random k-clauses, rejecting any clause that would push a degree past ``max_degree``."""
    rng = rng or random.Random(0)
    clauses: list[tuple[int, ...]] = []
    by_var: dict[int, set[int]] = {}
    degree: list[int] = []
    for _ in range(attempts):
        if len(clauses) == m:
            break
        vars_ = rng.sample(range(1, num_vars + 1), k)
        nbrs = set()
        for v in vars_:
            nbrs |= by_var.get(v, set())
        if len(nbrs) > max_degree or any(degree[c] + 1 > max_degree for c in nbrs):
            continue
        idx = len(clauses)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vars_))
        degree.append(len(nbrs))
        for c in nbrs:
            degree[c] += 1
        for v in vars_:
            by_var.setdefault(v, set()).add(idx)
    if len(clauses) < m:
        raise ValueError(f"only placed {len(clauses)} of {m} clauses")
    return CnfFormula(num_vars, tuple(clauses))


def random_uniform_hypergraph(m: int, k: int, num_vertices: int, max_degree: int,
                              rng: random.Random | None = None) -> Hypergraph:
    f = random_sparse_cnf(m, k, num_vertices, max_degree, rng)
    return Hypergraph(num_vertices, tuple(tuple(sorted(abs(l) for l in c)) for c in f.clauses))
