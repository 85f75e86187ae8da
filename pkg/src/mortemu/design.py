"""Training designs, budget allocation and batched training data."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .annuity import AnnuitySpec, path_values
from .emulate.kriging import TrainingSet
from .errors import UnsupportedDimensionError
from .mortality import simulate_states, state_dim, state_from_site
from .numcore import RngStream


@dataclass(frozen=True)
class BudgetAllocation:
    n_tr: int
    n_sites: int
    n_rep: int

    @property
    def used(self) -> int:
        return self.n_sites * self.n_rep


def allocate_budget(n_tr: int) -> BudgetAllocation:
    """Split ``n_tr`` simulations into about ``n_tr**(2/3)`` sites times
    ``n_tr**(1/3)`` replicates; the site count wins any rounding."""
    if n_tr < 8:
        raise ValueError("training budget must be at least 8")
    n1 = int(round(n_tr ** (2.0 / 3.0)))
    while n1 > 1 and n1 * round(n_tr / n1) > n_tr:
        n1 -= 1
    n2 = n_tr // n1
    if n2 < 2:
        n1 = n_tr // 2
        n2 = n_tr // n1
    return BudgetAllocation(n_tr, n1, n2)


@dataclass(frozen=True, eq=False)
class Design:
    """Design sites with per-site replication multiplicity.

    ``box`` is ``(lower, upper)`` for bounded kinds and ``None`` for
    empirical designs.
    """

    kind: str
    sites: np.ndarray
    box: Optional[tuple] = None
    seed: Optional[int] = None
    multiplicity: Optional[np.ndarray] = None

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=float)
        if sites.ndim == 1:
            sites = sites[:, None]
        object.__setattr__(self, "sites", sites)
        mult = (np.ones(len(sites), dtype=int) if self.multiplicity is None
                else np.asarray(self.multiplicity, dtype=int))
        object.__setattr__(self, "multiplicity", mult)

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    @property
    def dim(self) -> int:
        return self.sites.shape[1]


def _box(box):
    lo, hi = (np.atleast_1d(np.asarray(b, dtype=float)) for b in box)
    if lo.shape != hi.shape or np.any(hi <= lo) or not np.all(np.isfinite(hi - lo)):
        raise ValueError("box needs finite lower < upper in every coordinate")
    return lo, hi


def uniform_grid(box, n) -> Design:
    """Equally spaced lattice including the box corners.

    ``n`` is a per-axis count (int, broadcast) or a sequence of counts.
    """
    lo, hi = _box(box)
    counts = np.broadcast_to(np.asarray(n, dtype=int), lo.shape)
    if np.any(counts < 2):
        raise ValueError("need at least 2 points per axis")
    axes = [np.linspace(a, b, k) for a, b, k in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    sites = np.column_stack([m.ravel() for m in mesh])
    return Design("grid", sites, (lo, hi))


def lhs(box, n: int, stream: RngStream) -> Design:
    """Latin hypercube: one point per equal-width stratum on each axis."""
    if n < 1:
        raise ValueError("need at least one point")
    lo, hi = _box(box)
    d = lo.size
    u = np.empty((n, d))
    for j in range(d):
        perm = stream.permutation(n)
        u[:, j] = (perm + stream.uniform(n)) / n
    return Design("lhs", lo + u * (hi - lo), (lo, hi), seed=stream.seed)


# Joe-Kuo direction numbers for dimensions 2..8: (degree, coefficient bits, m_1..m_s)
_SOBOL_TABLE = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
)
SOBOL_MAX_DIM = len(_SOBOL_TABLE) + 1
_BITS = 32


def _direction_numbers(d: int) -> np.ndarray:
    v = np.zeros((d, _BITS), dtype=np.uint64)
    v[0] = [1 << (_BITS - 1 - k) for k in range(_BITS)]
    for j in range(1, d):
        s, a, m = _SOBOL_TABLE[j - 1]
        mm = list(m)
        for k in range(s, _BITS):
            val = mm[k - s] ^ (mm[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    val ^= mm[k - i] << i
            mm.append(val)
        v[j] = [mm[k] << (_BITS - 1 - k) for k in range(_BITS)]
    return v


def sobol_unit(n: int, d: int, skip: int = 0) -> np.ndarray:
    """Points ``skip .. skip+n-1`` of the unscrambled Sobol sequence in [0,1)^d."""
    if d < 1 or d > SOBOL_MAX_DIM:
        raise UnsupportedDimensionError(f"Sobol points available for 1 <= d <= {SOBOL_MAX_DIM}")
    if n < 0 or skip < 0:
        raise ValueError("n and skip must be non-negative")
    v = _direction_numbers(d)
    out = np.empty((n, d))
    x = np.zeros(d, dtype=np.uint64)
    gray = skip ^ (skip >> 1)
    for k in range(_BITS):
        if (gray >> k) & 1:
            x ^= v[:, k]
    scale = float(1 << _BITS)
    for i in range(n):
        out[i] = x / scale
        c = (~(skip + i) & (skip + i + 1)).bit_length() - 1
        x ^= v[:, c]
    return out


def sobol(box, n: int, skip: int = 0) -> Design:
    lo, hi = _box(box)
    u = sobol_unit(n, lo.size, skip)
    return Design("sobol", lo + u * (hi - lo), (lo, hi))


def merge_duplicates(sites: np.ndarray):
    uniq, inverse, counts = np.unique(sites, axis=0, return_inverse=True, return_counts=True)
    if len(uniq) == len(sites):
        return sites, np.ones(len(sites), dtype=int)
    first = np.full(len(uniq), len(sites))
    np.minimum.at(first, inverse.ravel(), np.arange(len(sites)))
    order = np.argsort(first)
    return uniq[order], counts[order]


def empirical_design(model, state0, T: int, n: int, stream: RngStream) -> Design:
    """``n`` draws of the time-T state; exact duplicates are merged."""
    if n < 1:
        raise ValueError("need at least one point")
    sites, mult = merge_duplicates(simulate_states(model, state0, T, stream, n))
    return Design("empirical", sites, None, seed=stream.seed, multiplicity=mult)


def quantile_box(model, state0, T: int, stream: RngStream, n_pilot: int = 10_000,
                 lower: float = 0.005, upper: float = 0.995):
    """Per-coordinate quantile box of the time-T state from a pilot sample."""
    Z = simulate_states(model, state0, T, stream, n_pilot)
    lo, hi = np.quantile(Z, [lower, upper], axis=0)
    return lo, hi


def percentile_test_set(model, state0, T: int, stream: RngStream, levels=None,
                        oversample: int = 100_000) -> Design:
    """Empirical percentiles of the (1-d) time-T state distribution."""
    if state_dim(model) != 1:
        raise UnsupportedDimensionError("percentile test sets need a 1-d state")
    if oversample < 10_000:
        raise ValueError("oversample must be at least 10^4")
    levels = np.arange(0.01, 1.0, 0.02) if levels is None else np.asarray(levels, dtype=float)
    if np.any((levels <= 0) | (levels >= 1)):
        raise ValueError("levels must lie in (0, 1)")
    Z = simulate_states(model, state0, T, stream, oversample)[:, 0]
    return Design("percentile", np.quantile(Z, np.sort(levels))[:, None], seed=stream.seed)


def batch(design: Design, model, spec: AnnuitySpec, stream: RngStream, n_rep: int,
          target: str = "hedge", pi: float = 1.0) -> TrainingSet:
    """Replicate pathwise values at each site and aggregate.

    Site ``i`` uses child stream ``i`` and ``n_rep * multiplicity[i]``
    paths. The noise variance is the sample variance over the site count.
    """
    if n_rep < 2:
        raise ValueError("need at least 2 replicates per site")
    n = design.n
    y, tau2, reps = np.empty(n), np.empty(n), design.multiplicity * n_rep
    for i, z in enumerate(design.sites):
        v = path_values(model, state_from_site(model, z, spec.T), spec, stream.spawn(i),
                        int(reps[i]), target, pi)
        y[i] = v.mean()
        tau2[i] = v.var(ddof=1)
    return TrainingSet(design.sites, y, tau2 / reps, tau2=tau2, n_rep=reps)


# ---------------------------------------------------------------------------
# CSV exchange


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, obj) -> None:
    """Write a Design or TrainingSet as ``z1..zd[, y, tau2], n_rep`` rows."""
    sites = obj.sites
    d = sites.shape[1]
    header = [f"z{j + 1}" for j in range(d)]
    if isinstance(obj, TrainingSet):
        header += ["y", "tau2", "n_rep"]
        tau2 = obj.tau2 if obj.tau2 is not None else obj.noise
        reps = obj.n_rep if obj.n_rep is not None else np.ones(len(sites), dtype=int)
        rows = ([_fmt(v) for v in s] + [_fmt(a), _fmt(b), str(int(c))]
                for s, a, b, c in zip(sites, obj.y, tau2, reps))
    else:
        header += ["n_rep"]
        rows = ([_fmt(v) for v in s] + [str(int(c))] for s, c in zip(sites, obj.multiplicity))
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    """Inverse of :func:`write_csv`."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    zcols = [i for i, h in enumerate(header) if h.startswith("z")]
    sites = body[:, zcols]
    reps = body[:, header.index("n_rep")].astype(int)
    if "y" in header:
        tau2 = body[:, header.index("tau2")]
        return TrainingSet(sites, body[:, header.index("y")], tau2 / reps, tau2=tau2,
                           n_rep=reps)
    return Design("file", sites, multiplicity=reps)
