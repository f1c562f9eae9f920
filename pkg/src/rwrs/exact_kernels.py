"""Deterministic return probabilities, Green's functions and resolvents.

Two independent routes are available for finite-support 2-D laws:

* ``convolution_dp`` pushes the distribution of S_m forward one jump at a
  time on the exact reachable box (no truncation).
* ``quadrature`` evaluates (2 pi)^-2 * integral of phi(t)^m e^{-i t.w}.  For
  a finite table phi^m is a trigonometric polynomial, so the periodic
  trapezoidal rule with more nodes than its degree is exact up to rounding.

For ``zeta1d`` only the Fourier route exists; it uses adaptive
Gauss-Kronrod quadrature (QUADPACK via scipy) on [0, pi] with geometric
breakpoints packed towards the kink of phi at t = 0.
"""

import math
import threading
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

from .errors import DomainError, ResourceError, UsageError
from .reports import FAIL, PASS, CheckReport, make_row
from .walk_models import char_fn_real

DP_MAX_STEPS = 4096
GRID_MAX_NODES = 4097
_QUAD_LIMIT = 400


@dataclass(frozen=True)
class KernelResult:
    parameter: float
    value: float
    method: str
    est_error: float

    def row(self):
        return {
            "method": self.method,
            "parameter": self.parameter,
            "value": self.value,
            "est_error": self.est_error,
        }


def _breakpoints(scale, upper=math.pi):
    """0, scale, 2 scale, 4 scale, ... , upper."""
    pts = [0.0]
    b = max(scale, 1e-300)
    while b < upper:
        pts.append(b)
        b *= 2.0
    pts.append(upper)
    return pts


def _quad_pieces(f, pts, epsabs=1e-15, epsrel=1e-13):
    total, err = 0.0, 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, e = integrate.quad(f, a, b, limit=_QUAD_LIMIT, epsabs=epsabs, epsrel=epsrel)
        total += v
        err += e
    return total, err


def _vector(w, d):
    if w is None:
        return np.zeros(d, dtype=np.int64)
    w = np.atleast_1d(np.asarray(w, dtype=np.int64))
    if w.shape != (d,):
        raise UsageError(f"w must be a vector of length {d}")
    return w


# -- return probabilities -----------------------------------------------------


def return_prob(model, m, w=None, method=None):
    """P[S_m = w] as a :class:`KernelResult`.

    ``method`` is ``"quadrature"``, ``"convolution_dp"`` or None (DP for
    finite tables, quadrature for zeta1d).
    """
    m = int(m)
    if m < 0:
        raise DomainError("m must be >= 0")
    w = _vector(w, model.dimension)
    if method is None:
        method = "convolution_dp" if model.is_table else "quadrature"
    if method == "convolution_dp":
        if not model.is_table:
            raise UsageError("convolution_dp needs a finite-support model")
        value = dp_series(model, m, [w])[0][m]
        return KernelResult(m, float(value), method, 1e-15 * (m + 1))
    if method != "quadrature":
        raise UsageError(f"unknown method {method!r}")
    if m == 0:
        return KernelResult(0, float(not w.any()), method, 0.0)
    if model.is_table:
        value, err = _grid_quadrature(model, m, w)
    else:
        value, err = _zeta_return(m, int(w[0]))
    return KernelResult(m, value, method, err)


def _zeta_return(m, w):
    def f(t):
        return char_fn_real_zeta(t) ** m * math.cos(w * t)

    val, err = _quad_pieces(f, _breakpoints(1.0 / (m + abs(w) + 1)))
    return val / math.pi, err / math.pi


def char_fn_real_zeta(t):
    return 1.0 - (3.0 / math.pi) * t + (1.5 / math.pi**2) * t * t


def _grid_nodes(model, degree):
    n = degree + 2
    if n > GRID_MAX_NODES:
        raise ResourceError(f"quadrature grid of {n}^2 nodes exceeds the budget")
    t = -math.pi + 2.0 * math.pi * np.arange(n) / n
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    phi = char_fn_real(model, np.stack([t1, t2], axis=-1))
    return t1, t2, phi, n


def _grid_quadrature(model, m, w):
    reach = int(np.abs(model.atoms).max())
    t1, t2, phi, n = _grid_nodes(model, reach * m + int(np.abs(w).max()))
    vals = phi**m * np.cos(t1 * w[0] + t2 * w[1])
    value = float(vals.sum()) / n**2
    return value, 1e-15 * n


def quadrature_series(model, m_max, w_list):
    """P[S_m = w] for m = 0..m_max via one exact trapezoid grid (tables only).

    Returns an array of shape (len(w_list), m_max + 1).
    """
    if not model.is_table:
        raise UsageError("quadrature_series needs a finite-support model")
    w_arr = [_vector(w, 2) for w in w_list]
    reach = int(np.abs(model.atoms).max())
    t1, t2, phi, n = _grid_nodes(model, reach * m_max + max(int(np.abs(w).max()) for w in w_arr))
    waves = [np.cos(t1 * w[0] + t2 * w[1]) for w in w_arr]
    out = np.zeros((len(w_arr), m_max + 1))
    power = np.ones_like(phi)
    for m in range(m_max + 1):
        for i, wave in enumerate(waves):
            out[i, m] = float((power * wave).sum()) / n**2
        power *= phi
    return out


def dp_series(model, m_max, w_list, check_mass=False):
    """P[S_m = w] for m = 0..m_max by exact forward convolution.

    Returns an array of shape (len(w_list), m_max + 1); with ``check_mass``
    also the per-step total masses.
    """
    if not model.is_table:
        raise UsageError("convolution_dp needs a finite-support model")
    m_max = int(m_max)
    if m_max > DP_MAX_STEPS:
        raise ResourceError(f"DP limited to m <= {DP_MAX_STEPS}, asked for {m_max}")
    reach = int(np.abs(model.atoms).max())
    half = reach * m_max
    size = 2 * half + 1
    dist = np.zeros((size, size))
    dist[half, half] = 1.0
    w_arr = [_vector(w, 2) for w in w_list]
    out = np.zeros((len(w_arr), m_max + 1))
    masses = np.zeros(m_max + 1)

    def read(m):
        for i, w in enumerate(w_arr):
            x, y = half + w[0], half + w[1]
            out[i, m] = dist[x, y] if 0 <= x < size and 0 <= y < size else 0.0
        if check_mass:
            masses[m] = math.fsum(dist.ravel())

    read(0)
    for m in range(1, m_max + 1):
        lo, hi = half - reach * (m - 1), half + reach * (m - 1) + 1
        src = dist[lo:hi, lo:hi].copy()
        dist[lo - reach:hi + reach, lo - reach:hi + reach] = 0.0
        for (dx, dy), p in zip(model.atoms, model.probs):
            dist[lo + dx:hi + dx, lo + dy:hi + dy] += p * src
        read(m)
    return (out, masses) if check_mass else out


def dp_distribution(model, m):
    """Full law of S_m on its reachable box (array, offset)."""
    if m > DP_MAX_STEPS:
        raise ResourceError(f"DP limited to m <= {DP_MAX_STEPS}")
    reach = int(np.abs(model.atoms).max())
    half = reach * m
    dist = np.zeros((2 * half + 1, 2 * half + 1))
    dist[half, half] = 1.0
    for k in range(1, m + 1):
        lo, hi = half - reach * (k - 1), half + reach * (k - 1) + 1
        src = dist[lo:hi, lo:hi].copy()
        dist[:] = 0.0
        for (dx, dy), p in zip(model.atoms, model.probs):
            dist[lo + dx:hi + dx, lo + dy:hi + dy] += p * src
    return dist, half


# -- Green's function ---------------------------------------------------------

_green_lock = threading.Lock()


def green_fn(model, n):
    """Truncated Green's function h(n) = sum_{k=0}^n P[S_k = 0].

    Short horizons sum memoized return probabilities with compensated
    summation.  Long horizons integrate the geometric series
    sum_k phi^k = (1 - phi^{n+1}) / (1 - phi) in one adaptive quadrature,
    which is algebraically the same sum.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    if model.is_table and n <= 512:
        seq = _memo_table_returns(model, n)
        return KernelResult(n, math.fsum(seq[: n + 1]), "convolution_dp", 1e-14 * n)
    if not model.is_table and n <= 64:
        vals = [return_prob(model, k).value for k in range(n + 1)]
        errs = [return_prob(model, k).est_error for k in range(n + 1)]
        return KernelResult(n, math.fsum(vals), "quadrature", math.fsum(errs))
    if model.dimension == 1:
        value, err = _green_zeta(n)
    else:
        value, err = _green_2d(model, n)
    return KernelResult(n, value, "quadrature", err)


_table_memo = {}


def _memo_table_returns(model, n):
    key = (model.name, tuple(map(tuple, model.atoms)), tuple(model.probs))
    with _green_lock:
        seq = _table_memo.get(key)
    if seq is None or len(seq) <= n:
        m = max(n, 2 * (len(seq) - 1) if seq is not None else n)
        m = min(m, 512)
        seq = dp_series(model, m, [(0, 0)])[0]
        with _green_lock:
            _table_memo[key] = seq
    return seq


def _green_zeta(n):
    def f(t):
        phi = char_fn_real_zeta(t)
        one_minus = (3.0 / math.pi) * t - (1.5 / math.pi**2) * t * t
        if one_minus < 1e-300:
            return n + 1.0
        return -math.expm1((n + 1) * math.log1p(-one_minus)) / one_minus if phi > 0 else (
            (1.0 - phi ** (n + 1)) / one_minus)

    val, err = _quad_pieces(f, _breakpoints(1.0 / (n + 1)))
    return val / math.pi, err / math.pi


def _green_2d(model, n):
    """Adaptive 2-D quadrature of the geometric-series integrand over [0, pi]^2.

    Valid for laws whose phi is even in each coordinate (true for the
    built-in lattice-symmetric tables).
    """
    atoms = model.atoms.astype(float)
    probs = model.probs
    if not _coordinate_even(model):
        raise UsageError("2-D Green's function quadrature needs a coordinate-even law")
    scale = 1.0 / math.sqrt(n + 1)

    def g(t2, t1):
        phase = atoms[:, 0] * t1 + atoms[:, 1] * t2
        phi = float(np.cos(phase) @ probs)
        one_minus = 1.0 - phi
        if one_minus < 1e-14:
            # near t = 0: 1 - phi is tiny, use the exact limit n + 1
            return float(n + 1)
        if phi >= 0:
            return -math.expm1((n + 1) * math.log(phi)) / one_minus if phi > 0 else 1.0 / one_minus
        return (1.0 - phi ** (n + 1)) / one_minus

    pts = _breakpoints(scale)
    pts_hi = sorted({math.pi - p for p in pts} | set(pts))
    total, err = 0.0, 0.0
    for a, b in zip(pts_hi[:-1], pts_hi[1:]):
        inner_pts = pts_hi

        def outer(t1):
            v, _ = _quad_pieces(lambda t2: g(t2, t1), inner_pts, epsabs=1e-12, epsrel=1e-10)
            return v

        v, e = integrate.quad(outer, a, b, limit=_QUAD_LIMIT, epsabs=1e-11, epsrel=1e-9)
        total += v
        err += e
    factor = 4.0 / (2.0 * math.pi) ** 2
    return total * factor, err * factor + 1e-9


def _coordinate_even(model):
    lookup = {tuple(a): p for a, p in zip(model.atoms, model.probs)}
    return all(abs(lookup.get((a[0], -a[1]), 0.0) - p) < 1e-12 for a, p in lookup.items())


def srw_return_exact(m):
    """P[S_m = 0] for the 2-D simple random walk: (C(m, m/2) / 2^m)^2, m even."""
    if m % 2:
        return 0.0
    k = m // 2
    if m <= 2000:
        return float(Fraction(math.comb(m, k), 2**m) ** 2)
    lg = math.lgamma(2 * k + 1) - 2 * math.lgamma(k + 1) - 2 * k * math.log(2.0)
    return math.exp(2.0 * lg)


# -- resolvent ----------------------------------------------------------------


def resolvent_integral(model, lam):
    """(1/2pi) * integral over [-pi, pi] of lam phi / (1 - lam phi), d = 1.

    Evaluated in complex arithmetic; the imaginary part must cancel.
    """
    if model.dimension != 1:
        raise UsageError("the resolvent integral is defined for d = 1")
    lam = float(lam)
    if lam >= 1.0 or lam < 0.0:
        raise DomainError("lambda must lie in [0, 1)")
    if lam == 0.0:
        return KernelResult(lam, 0.0, "quadrature", 0.0)

    def integrand(t):
        phi = complex(char_fn_real_zeta(abs(t)))
        return lam * phi / (1.0 - lam * phi)

    pts = _breakpoints(max((1.0 - lam) / model.gamma_1, 1e-14))
    neg = [-p for p in reversed(pts)]
    parts = []
    for grid in (neg, pts):
        re, err = _quad_pieces(lambda t: integrand(t).real, grid, epsabs=1e-14, epsrel=1e-11)
        im, _ = _quad_pieces(lambda t: integrand(t).imag, grid, epsabs=1e-14, epsrel=1e-11)
        parts.append((re, im, err))
    imag = sum(p[1] for p in parts) / (2.0 * math.pi)
    if abs(imag) > 1e-10:
        raise ArithmeticError(f"imaginary residue {imag!r} in the resolvent integral")
    value = sum(p[0] for p in parts) / (2.0 * math.pi)
    return KernelResult(lam, value, "quadrature", sum(p[2] for p in parts) / (2.0 * math.pi))


def _legendre_rule(n_nodes):
    nodes, weights = roots_legendre(int(n_nodes))
    u = 0.5 * (nodes + 1.0)
    return 1.5 * u * u - 0.5, 0.5 * weights


def zeta_return_series(m_max):
    """P[S_m = 0] for zeta1d, m = 0..m_max, by exact polynomial integration.

    With u = 1 - t/pi the characteristic function becomes (3u^2 - 1)/2, the
    Legendre polynomial P_2(u), so P[S_m = 0] = integral_0^1 P_2(u)^m du.
    Gauss-Legendre with m_max + 1 nodes integrates every power exactly in
    exact arithmetic; in floating point the large rules carry node and
    weight rounding of order 1e-12 at m_max ~ 10^3.
    """
    m_max = int(m_max)
    p2, wts = _legendre_rule(m_max + 1)
    out = np.empty(m_max + 1)
    power = np.ones_like(p2)
    for m in range(m_max + 1):
        out[m] = wts @ power
        power *= p2
    return out


def resolvent_series(lam, m_max):
    """Partial series sum_{m=1}^{m_max} lam^m P[S_m = 0] for zeta1d.

    Returns (value, truncation bound).  Terms past M, where
    lam^M / (1 - lam) < 1e-18, are dropped and bounded; the remaining
    finite sum is integrated exactly node by node with Gauss-Legendre.
    """
    lam = float(lam)
    m_max = int(m_max)
    if lam <= 0.0 or m_max < 1:
        return 0.0, 0.0
    cut = math.ceil(math.log(1e-18 * (1.0 - lam)) / math.log(lam))
    M = min(m_max, max(cut, 1))
    p2, wts = _legendre_rule(M + 1)
    x = lam * p2
    terms = x * (1.0 - x**M) / (1.0 - x)
    bound = lam ** (M + 1) / (1.0 - lam) if M < m_max else 0.0
    return math.fsum(wts * terms), bound


# -- potential bound ----------------------------------------------------------


def potential_bound_check(model, m_list, w_list):
    """Scan m^2 |P[S_m = w] - P[S_m = 0]| / |w| over a grid.

    Each row holds the maximum over ``w_list`` at one m; the target is the
    value at the smallest m and the verdict passes when the whole sequence
    stays below twice that value.  Period-2 laws use the pair sums
    p(m) + p(m + 1), which cancel the parity oscillation.
    """
    start = time.perf_counter()
    m_list = sorted(int(m) for m in m_list)
    if not m_list or m_list[0] < 2:
        raise DomainError("all m must be >= 2")
    ws = [_vector(w, model.dimension) for w in w_list]
    if any(not w.any() for w in ws):
        raise DomainError("w = 0 is excluded (the ratio is 0/0)")
    paired = model.period == 2
    top = m_list[-1] + (1 if paired else 0)
    zero = np.zeros(model.dimension, dtype=np.int64)

    if model.is_table:
        table = dp_series(model, top, [zero] + ws)

        def prob(i, m):
            return table[i, m]
    else:
        cache = {}

        def prob(i, m):
            w = zero if i == 0 else ws[i - 1]
            key = (i, m)
            if key not in cache:
                cache[key] = return_prob(model, m, w, "quadrature").value
            return cache[key]

    values = []
    for m in m_list:
        best = 0.0
        for i, w in enumerate(ws, start=1):
            if paired:
                diff = prob(i, m) + prob(i, m + 1) - prob(0, m) - prob(0, m + 1)
            else:
                diff = prob(i, m) - prob(0, m)
            best = max(best, m * m * abs(diff) / float(np.linalg.norm(w)))
        values.append(best)
    target = values[0] if values[0] > 0 else 1.0
    rows = [make_row(m, v, target) for m, v in zip(m_list, values)]
    ok = all(math.isfinite(v) and v <= 2.0 * values[0] for v in values)
    return CheckReport(
        check="potential_bound",
        model=model.name,
        params={"m_list": m_list, "w_list": [w.tolist() for w in ws], "paired": paired},
        rows=rows,
        verdict=PASS if ok else FAIL,
        runtime_ms=int(1000 * (time.perf_counter() - start)),
    )
