"""Query-counted objectives, benchmark families, and the graph loader.

A :class:`BlackBoxFunction` is the only channel to an objective:
optimizers see values, never structure.  :func:`with_ledger` threads an
exact evaluation count through a function, enforcing the query budget
that every experiment shares.

The three benchmark families are a sparse quadratic bowl (``distance``),
a magnitude-ranking objective flat in most directions (``magnitude``),
and a graph-connectivity attack over edge perturbations (``attack``);
``sparse-linear`` is the exactly-solvable family used by tests and the
scaling probe.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .rng import RngStream

__all__ = [
    "BlackBoxFunction",
    "QueryLedger",
    "BudgetExhaustedError",
    "with_ledger",
    "Graph",
    "GraphParseError",
    "load_graph",
    "DegenerateDegreeError",
    "BenchmarkInstance",
    "make_distance",
    "make_magnitude",
    "make_attack",
    "make_sparse_linear",
    "make_planted_linear",
    "describe_instance",
    "instance_from_description",
]


@dataclass
class BlackBoxFunction:
    """A dimension-d objective evaluable only pointwise."""

    dim: int
    eval: Callable[[np.ndarray], float]

    def __call__(self, x) -> float:
        return self.eval(x)


class BudgetExhaustedError(RuntimeError):
    """An evaluation would push the ledger past its cap.

    Raised before the evaluation happens, so the count never exceeds
    the cap.  ``partial`` may carry in-progress bookkeeping from the
    raiser (see the estimator); any values inside are incomplete and
    must not be used as a gradient.
    """

    def __init__(self, count: int, cap: int):
        super().__init__(f"query budget exhausted: {count} queries used, cap {cap}")
        self.count = count
        self.cap = cap
        self.partial = None


@dataclass
class QueryLedger:
    """Monotone count of completed evaluations, optionally capped."""

    count: int = 0
    cap: int | None = None


def with_ledger(f: BlackBoxFunction, cap: int | None = None) -> tuple[BlackBoxFunction, QueryLedger]:
    """Wrap f so every evaluation ticks a shared ledger.

    The count moves only on evaluations that complete; a call that would
    exceed the cap raises :class:`BudgetExhaustedError` without touching f.
    """
    ledger = QueryLedger(0, cap)

    def counted(x):
        if ledger.cap is not None and ledger.count + 1 > ledger.cap:
            raise BudgetExhaustedError(ledger.count, ledger.cap)
        value = f.eval(x)
        ledger.count += 1
        return value

    return BlackBoxFunction(f.dim, counted), ledger


class GraphParseError(ValueError):
    """Malformed edge-list document; the message names the offending line."""


@dataclass
class Graph:
    """Undirected simple graph as a dense symmetric 0/1 adjacency matrix."""

    n: int
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        self.adjacency = a.astype(np.int64)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


def _parse_int_pair(line_number: int, line: str) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise GraphParseError(
            f"line {line_number}: expected two nonnegative integers, got {line.rstrip()!r}"
        )
    return int(parts[0]), int(parts[1])


def load_graph(text: str) -> Graph:
    """Parse an edge-list document: header line "n m", then m lines "a b".

    Vertices are 1-based.  Duplicate edges collapse; self-loops and
    out-of-range vertices are rejected with the offending line number.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise GraphParseError("line 1: expected header 'n m'")
    n, m = _parse_int_pair(1, lines[0])
    if n < 1:
        raise GraphParseError("line 1: need at least one vertex")
    if len(lines) - 1 != m:
        raise GraphParseError(
            f"header declares {m} edges but the document has {len(lines) - 1} edge lines"
        )
    adjacency = np.zeros((n, n), dtype=np.int64)
    for offset, line in enumerate(lines[1:]):
        line_number = offset + 2
        a, b = _parse_int_pair(line_number, line)
        if not (1 <= a <= n and 1 <= b <= n):
            raise GraphParseError(f"line {line_number}: vertex out of range 1..{n}")
        if a == b:
            raise GraphParseError(f"line {line_number}: self-loop at vertex {a}")
        adjacency[a - 1, b - 1] = 1
        adjacency[b - 1, a - 1] = 1
    return Graph(n, adjacency)


class DegenerateDegreeError(RuntimeError):
    """A perturbed adjacency row lost all weight; degree normalization is undefined."""


@dataclass
class BenchmarkInstance:
    """An objective, its start point, and the metadata to rebuild both.

    metadata always holds ``family`` and ``d``; generated families add
    the rng key (``seed``, ``stream``, ``path``), their parameters, and
    the planted structure (support, center, ...) that tests and analytic
    gradients need.
    """

    objective: BlackBoxFunction
    x1: np.ndarray
    metadata: dict = field(default_factory=dict)


def _random_support(d: int, s: int, rng: RngStream) -> np.ndarray:
    """Uniform size-s subset of {0..d-1}, sorted (0-based positions)."""
    return np.sort(rng.gen.permutation(d)[:s])


def _rng_key(rng: RngStream) -> dict:
    return {"seed": rng.seed, "stream": rng.stream, "path": rng.path}


def make_distance(d: int, s: int, rng: RngStream) -> BenchmarkInstance:
    """Sparse quadratic bowl f(x) = (x - c)' W (x - c) with diagonal W.

    The center c has exactly s nonzero coordinates with Unif(0,1)
    values; all d diagonal weights are Unif(0,1); the start point is the
    origin, so the initial gradient lives on the center's support.
    Draw order: support, center values, weights.
    """
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    positions = _random_support(d, s, rng)
    center = np.zeros(d)
    center[positions] = rng.gen.random(s)
    weights = rng.gen.random(d)

    def evaluate(x):
        delta = np.asarray(x, dtype=float) - center
        return float(delta @ (weights * delta))

    metadata = {
        "family": "distance",
        "d": d,
        "s": s,
        **_rng_key(rng),
        "support": tuple(int(p) + 1 for p in positions),
        "center": center,
        "weights": weights,
    }
    return BenchmarkInstance(BlackBoxFunction(d, evaluate), np.zeros(d), metadata)


def make_magnitude(d: int, s: int, lam: float, w: float, rng: RngStream) -> BenchmarkInstance:
    """Magnitude-ranking objective: reward s large coordinates, tax the rest.

    f(x) = lam * sum of tanh(squared magnitudes) over all but the s
    largest, minus the same sum over the s largest, plus s.  Only the
    sorted squared magnitudes enter, so coordinate ties cannot change
    the value and f is invariant to coordinate permutations.  The start
    point puts +-w on a uniformly random size-s support.
    """
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    if lam <= 0 or w <= 0:
        raise ValueError("need lam > 0 and w > 0")
    positions = _random_support(d, s, rng)
    signs = 2.0 * rng.gen.integers(0, 2, size=s) - 1.0
    x1 = np.zeros(d)
    x1[positions] = w * signs

    def evaluate(x):
        squares = np.square(np.asarray(x, dtype=float))
        squares.sort()
        scores = np.tanh(squares)
        return float(lam * scores[: d - s].sum() - scores[d - s :].sum() + s)

    metadata = {
        "family": "magnitude",
        "d": d,
        "s": s,
        **_rng_key(rng),
        "lam": lam,
        "w": w,
        "support": tuple(int(p) + 1 for p in positions),
    }
    return BenchmarkInstance(BlackBoxFunction(d, evaluate), x1, metadata)


def make_attack(graph: Graph, u: int, v: int, hops: int, lam: float) -> BenchmarkInstance:
    """Connectivity attack: suppress short walks between two vertices.

    A point reshapes row-major to an n-by-n perturbation X.  The
    perturbed adjacency max(A(1-|X|) + (1-A)|X|, 0) is degree-normalized
    symmetrically, and the objective sums the (u,v) entries of its first
    ``hops`` powers plus a Frobenius penalty lam * ||X||^2.  A zero row
    sum makes the normalization undefined and raises
    :class:`DegenerateDegreeError`.
    """
    n = graph.n
    if not (1 <= u <= n and 1 <= v <= n):
        raise ValueError(f"vertices must lie in 1..{n}, got u={u}, v={v}")
    if u == v:
        raise ValueError("need distinct vertices u != v")
    if hops < 1:
        raise ValueError(f"need hops >= 1, got {hops}")
    if lam < 0:
        raise ValueError(f"need lam >= 0, got {lam}")
    base = graph.adjacency.astype(float)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        magnitude = np.abs(x.reshape(n, n))
        perturbed = np.maximum(base * (1.0 - magnitude) + (1.0 - base) * magnitude, 0.0)
        degrees = perturbed.sum(axis=1)
        dead = np.flatnonzero(degrees == 0.0)
        if dead.size:
            raise DegenerateDegreeError(
                f"perturbed adjacency has zero-degree vertices {(dead + 1).tolist()}"
            )
        scale = 1.0 / np.sqrt(degrees)
        normalized = perturbed * np.outer(scale, scale)
        power = normalized
        total = power[u - 1, v - 1]
        for _ in range(hops - 1):
            power = power @ normalized
            total += power[u - 1, v - 1]
        return float(total + lam * (x @ x))

    metadata = {
        "family": "attack",
        "d": n * n,
        "n": n,
        "u": u,
        "v": v,
        "hops": hops,
        "lam": lam,
    }
    return BenchmarkInstance(BlackBoxFunction(n * n, evaluate), np.zeros(n * n), metadata)


def make_planted_linear(
    d: int, s: int, rng: RngStream, low: float = 0.5, high: float = 1.5
) -> BenchmarkInstance:
    """Sparse linear objective with Unif(low, high) coefficients on a random support.

    The planted support is recorded in the metadata, making this the
    family of choice for recovery measurements: the gradient is exactly
    the coefficient vector, with zero curvature to blur the probes.
    """
    if not 1 <= s <= d:
        raise ValueError(f"need 1 <= s <= d, got s={s}, d={d}")
    positions = _random_support(d, s, rng)
    values = low + (high - low) * rng.gen.random(s)
    coeffs = {int(p) + 1: float(c) for p, c in zip(positions, values)}
    instance = make_sparse_linear(d, coeffs)
    instance.metadata.update(
        {"family": "planted-linear", "s": s, **_rng_key(rng), "support": tuple(sorted(coeffs))}
    )
    return instance


def make_sparse_linear(d: int, coeffs: dict) -> BenchmarkInstance:
    """Exactly linear objective sum_j c_j x_j; the gradient is c everywhere."""
    items = sorted((int(j), float(c)) for j, c in coeffs.items())
    if items and not (1 <= items[0][0] and items[-1][0] <= d):
        raise ValueError(f"coefficient indices must lie in 1..{d}")
    positions = np.array([j - 1 for j, _ in items], dtype=np.int64)
    values = np.array([c for _, c in items])

    def evaluate(x):
        if positions.size == 0:
            return 0.0
        return float(np.asarray(x, dtype=float)[positions] @ values)

    metadata = {"family": "sparse-linear", "d": d, "s": len(items), "coeffs": dict(items)}
    return BenchmarkInstance(BlackBoxFunction(d, evaluate), np.zeros(d), metadata)


# --- instance descriptions (exact re-instantiation from a text document) ---

_GENERATED_FAMILIES = {"distance", "magnitude", "planted-linear"}


def describe_instance(instance: BenchmarkInstance) -> str:
    """Serialize the generating parameters of an instance to an INI document.

    Captures family, dimensions, and for generated families the rng key,
    which re-runs the maker's draws exactly.  The maker must have been
    given a freshly derived stream; a stream with consumed state cannot
    be reconstructed from its key.
    """
    meta = instance.metadata
    parser = configparser.ConfigParser()
    parser["instance"] = {}
    section = parser["instance"]
    section["family"] = meta["family"]
    section["d"] = str(meta["d"])
    for key in ("s", "n", "u", "v", "hops"):
        if key in meta:
            section[key] = str(meta[key])
    for key in ("lam", "w"):
        if key in meta:
            section[key] = repr(meta[key])
    if meta["family"] in _GENERATED_FAMILIES:
        section["seed"] = str(meta["seed"])
        section["stream"] = str(meta["stream"])
        section["path"] = " ".join(str(k) for k in meta["path"])
    if meta["family"] == "sparse-linear":
        section["coeffs"] = " ".join(f"{j}:{repr(c)}" for j, c in sorted(meta["coeffs"].items()))
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def instance_from_description(text: str, graph: Graph | None = None) -> BenchmarkInstance:
    """Rebuild an instance from :func:`describe_instance` output.

    The attack family needs its graph supplied; the graph itself is
    external input and is not embedded in descriptions.
    """
    parser = configparser.ConfigParser()
    parser.read_string(text)
    section = parser["instance"]
    family = section["family"]
    d = int(section["d"])
    if family in _GENERATED_FAMILIES:
        path = tuple(int(k) for k in section.get("path", "").split())
        rng = RngStream(int(section["seed"]), int(section["stream"]), path)
        if family == "distance":
            return make_distance(d, int(section["s"]), rng)
        if family == "planted-linear":
            return make_planted_linear(d, int(section["s"]), rng)
        return make_magnitude(d, int(section["s"]), float(section["lam"]), float(section["w"]), rng)
    if family == "attack":
        if graph is None:
            raise ValueError("attack instances need their graph passed explicitly")
        return make_attack(
            graph, int(section["u"]), int(section["v"]), int(section["hops"]), float(section["lam"])
        )
    if family == "sparse-linear":
        coeffs = {}
        for token in section.get("coeffs", "").split():
            j, _, c = token.partition(":")
            coeffs[int(j)] = float(c)
        return make_sparse_linear(d, coeffs)
    raise ValueError(f"unknown family {family!r}")
