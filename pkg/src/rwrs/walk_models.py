"""Jump distributions for the driving random walk.

Three built-in models are provided:

``zeta1d``
    Symmetric law on the nonzero integers with P(xi = k) = (3/pi^2)/k^2.
    Its characteristic function is the exact polynomial
    1 - (3/pi)|t| + (3/(2 pi^2)) t^2 on [-pi, pi], so the walk is in the
    Cauchy domain of attraction with gamma = 3/pi.
``srw2d``
    Simple random walk on Z^2 (period 2, sqrt(det Sigma) = 1/2).
``lazy_srw2d``
    Simple random walk that holds with probability 1/2 (strongly aperiodic,
    sqrt(det Sigma) = 1/4).

Custom symmetric two-dimensional tables can be loaded from a text file with
``dx dy probability`` rows.
"""

import math
import threading
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.special import polygamma

from .errors import ConfigurationError, DomainError

ZETA_C = 3.0 / math.pi**2
ZETA_GAMMA = 3.0 / math.pi

BUILTIN_MODELS = ("zeta1d", "srw2d", "lazy_srw2d")

_TABLE_TOL = 1e-12
_DOMAIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JumpModel:
    name: str
    dimension: int
    strongly_aperiodic: bool
    period: int
    gamma_d: float
    gamma_1: float = None
    sqrt_det_sigma: float = None
    # finite tables only: (K, d) integer atoms and their masses
    atoms: np.ndarray = field(default=None, repr=False)
    probs: np.ndarray = field(default=None, repr=False)

    @property
    def is_table(self):
        return self.atoms is not None

    def info(self):
        """Constants as a plain dict (used by ``model info``)."""
        out = {
            "name": self.name,
            "dimension": self.dimension,
            "strongly_aperiodic": self.strongly_aperiodic,
            "period": self.period,
            "gamma_1": self.gamma_1,
            "sqrt_det_sigma": self.sqrt_det_sigma,
            "gamma_d": self.gamma_d,
        }
        if self.is_table:
            out["jump_law"] = [
                [*map(int, a), float(p)] for a, p in zip(self.atoms, self.probs)
            ]
        else:
            out["jump_law"] = "P(xi=k) = (3/pi^2)/k^2, k != 0"
        return out


def build_model(name):
    """Return the fully populated :class:`JumpModel` for a built-in name.

    A path to a table file is also accepted (see :func:`load_table`).
    """
    if name == "zeta1d":
        return JumpModel(
            name="zeta1d",
            dimension=1,
            strongly_aperiodic=True,
            period=1,
            gamma_1=ZETA_GAMMA,
            gamma_d=math.pi * ZETA_GAMMA,
        )
    if name == "srw2d":
        atoms = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        return table_model("srw2d", atoms, [0.25] * 4)
    if name == "lazy_srw2d":
        atoms = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
        return table_model("lazy_srw2d", atoms, [0.5] + [0.125] * 4)
    if isinstance(name, str) and (name.endswith(".txt") or "/" in name):
        return load_table(name)
    raise ConfigurationError(
        f"unknown model {name!r}; expected one of {', '.join(BUILTIN_MODELS)} "
        "or a table file"
    )


def table_model(name, atoms, probs):
    """Build a two-dimensional model from an explicit finite table."""
    atoms = np.asarray(atoms, dtype=np.int64)
    probs = np.asarray(probs, dtype=float)
    if atoms.ndim != 2 or atoms.shape[1] != 2 or len(atoms) != len(probs):
        raise ConfigurationError("a jump table needs (dx, dy, probability) rows")
    if np.any(probs < 0):
        raise ConfigurationError("negative probability in jump table")
    if abs(probs.sum() - 1.0) > _TABLE_TOL:
        raise ConfigurationError(f"jump table sums to {probs.sum()!r}, not 1")
    keep = probs > 0
    atoms, probs = atoms[keep], probs[keep]
    # merge duplicated atoms
    uniq, inv = np.unique(atoms, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv.ravel(), probs)
    atoms, probs = uniq, merged

    lookup = {tuple(a): p for a, p in zip(atoms, probs)}
    for a, p in lookup.items():
        if abs(lookup.get((-a[0], -a[1]), 0.0) - p) > _TABLE_TOL:
            raise ConfigurationError("jump table is not symmetric under v -> -v")

    cov = (atoms.T * probs) @ atoms
    det = float(np.linalg.det(cov))
    if det <= 1e-14:
        raise ConfigurationError("jump table has a singular covariance matrix")
    sqrt_det = math.sqrt(det)
    return JumpModel(
        name=name,
        dimension=2,
        strongly_aperiodic=_lattice_index(atoms) == 1,
        period=_period(atoms),
        sqrt_det_sigma=sqrt_det,
        gamma_d=2.0 * math.pi * sqrt_det,
        atoms=atoms,
        probs=probs,
    )


def load_table(path):
    """Load a custom table from a whitespace/comma separated text file."""
    try:
        with open(path) as fh:
            rows = [
                line.replace(",", " ").split()
                for line in fh
                if line.strip() and not line.lstrip().startswith("#")
            ]
    except OSError as exc:
        raise ConfigurationError(f"cannot read jump table {path!r}: {exc}") from exc
    try:
        atoms = [(int(r[0]), int(r[1])) for r in rows]
        probs = [float(r[2]) for r in rows]
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"malformed jump table {path!r}: {exc}") from exc
    return table_model("custom_table", atoms, probs)


def _lattice_index(atoms):
    """Index in Z^2 of the lattice L spanned by differences of the support."""
    diffs = atoms[1:] - atoms[0]
    minors = [
        abs(int(u[0] * v[1] - u[1] * v[0]))
        for i, u in enumerate(diffs)
        for v in diffs[i + 1:]
    ]
    return reduce(math.gcd, minors, 0)


def _period(atoms):
    """Order of an atom in Z^2 / L: the gcd of the possible return times.

    L contains idx * Z^2, so L is enumerated as a set of residues mod idx.
    """
    idx = _lattice_index(atoms)
    if idx <= 1:
        return 1
    diffs = {(int(d[0]) % idx, int(d[1]) % idx) for d in atoms[1:] - atoms[0]}
    lattice, frontier = {(0, 0)}, [(0, 0)]
    while frontier:
        x = frontier.pop()
        for d in diffs:
            y = ((x[0] + d[0]) % idx, (x[1] + d[1]) % idx)
            if y not in lattice:
                lattice.add(y)
                frontier.append(y)
    a = atoms[0]
    for m in range(1, idx + 1):
        if ((m * int(a[0])) % idx, (m * int(a[1])) % idx) in lattice:
            return m
    return idx


# -- characteristic functions -------------------------------------------------


def char_fn(model, t):
    """E exp(i t.xi) for ``t`` in the fundamental domain [-pi, pi]^d.

    ``t`` may be a scalar (d = 1), a length-d vector, or an array whose last
    axis has length d.  Returns complex values.
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > math.pi + _DOMAIN_TOL):
        raise DomainError("t lies outside [-pi, pi]^d")
    if model.dimension == 1 and t.ndim >= 1 and t.shape[-1] == 1:
        t = t[..., 0]
    if model.dimension == 2 and (t.ndim == 0 or t.shape[-1] != 2):
        raise DomainError("a two-dimensional model needs t of shape (..., 2)")
    val = char_fn_real(model, t)
    out = val.astype(complex)
    if not model.is_table:
        return out if out.ndim else complex(out)
    # symmetric tables have no imaginary part; keep the sine sum explicit
    phase = t @ model.atoms.T.astype(float)
    out = out + 1j * (np.sin(phase) @ model.probs)
    return out if out.ndim else complex(out)


def char_fn_real(model, t):
    """Real characteristic function for symmetric laws (no domain check)."""
    t = np.asarray(t, dtype=float)
    if model.name == "zeta1d":
        a = np.abs(t)
        return 1.0 - ZETA_GAMMA * a + (1.5 / math.pi**2) * a * a
    phase = t @ model.atoms.T.astype(float)
    return np.cos(phase) @ model.probs


# -- sampling -----------------------------------------------------------------


class _ZetaTail:
    """Inverse CDF of |xi| for the zeta law.

    ``G(k) = P(|xi| >= k) = (6/pi^2) * trigamma(k)``.  A table of G is kept
    for small k and doubled on demand; draws beyond the table cap are
    inverted analytically with exact trigamma refinement.
    """

    CAP = 1 << 22

    def __init__(self, size=1 << 12):
        self._lock = threading.Lock()
        self._table = self._build(size)

    @staticmethod
    def _build(size):
        k = np.arange(1, size + 2, dtype=float)
        g = (6.0 / math.pi**2) * polygamma(1, k)
        g[0] = 1.0
        # negated so that the array is increasing for searchsorted
        return -g

    def _ensure(self, vmin):
        table = self._table
        while -table[-1] > vmin and len(table) - 1 < self.CAP:
            with self._lock:
                if self._table is table:
                    self._table = self._build(2 * (len(table) - 1))
                table = self._table
        return table

    def invert(self, v):
        """Smallest k >= 1 with G(k + 1) <= v, for v in (0, 1]."""
        v = np.asarray(v, dtype=float)
        table = self._ensure(v.min() if v.size else 1.0)
        # table[j] = -G(j + 1); want smallest k with -G(k + 1) >= -v
        k = np.searchsorted(table, -v, side="left").astype(np.int64)
        far = k >= len(table)
        if np.any(far):
            k[far] = self._invert_tail(v[far])
        return np.maximum(k, 1)

    @staticmethod
    def _invert_tail(v):
        c = 6.0 / math.pi**2
        k = np.maximum(np.floor(c / v - 0.5), 1.0)

        def tail(x):
            return c * polygamma(1, x)

        for _ in range(64):
            up = tail(k + 1.0) > v
            k = np.where(up, k + 1.0, k)
            down = (k > 1) & (tail(k) <= v)
            k = np.where(down, k - 1.0, k)
            if not (up.any() or down.any()):
                break
        return k.astype(np.int64)


_ZETA_TAIL = _ZetaTail()


def zeta_abs_cdf(k):
    """P(|xi| <= k) for the zeta law (k >= 0)."""
    k = np.asarray(k, dtype=float)
    return np.where(k < 1, 0.0, 1.0 - (6.0 / math.pi**2) * polygamma(1, np.floor(k) + 1.0))


def sample_jumps(model, rng, size):
    """Draw ``size`` i.i.d. jumps; returns an int64 array of shape (size, d)."""
    u = rng.random(size)
    if model.name == "zeta1d":
        sign = rng.integers(0, 2, size=size) * 2 - 1
        mag = _ZETA_TAIL.invert(1.0 - u)
        return (sign * mag).reshape(size, 1)
    cum = np.cumsum(model.probs)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, u, side="right")
    return model.atoms[idx]


def sample_jump(model, rng):
    """Draw a single jump as a tuple (a lattice vector)."""
    return tuple(int(x) for x in sample_jumps(model, rng, 1)[0])
