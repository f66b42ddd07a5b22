"""Nonlocal tug-of-war with symmetric stable increments.

Two games are simulated.  In the exit game a token moves by a stable
increment of duration ``eps`` along a direction chosen by player one
(positive draws) or player two (negative draws) until it leaves the
domain, and the payoff is read from exterior data.  In the stopping game
player one may stop for the lower obstacle and player two for the upper
one before every move.

Value tables hold the discrete dynamic-programming fixed point.  The
transition density is represented by the envelope
``eps / (eps**(1/s) + eta**2)**((2s+1)/2)`` integrated exactly over lattice
cells, normalised to mass one per side.
"""
import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import betainc

from . import _kernels
from .errors import ConfigError, KernelMassError, NoConvergence, PolicyError
from .operator import check_exponent, sphere_directions

RUNNING = "running"
EXITED = "exited"
STOPPED_BY_ONE = "stopped_by_one"
STOPPED_BY_TWO = "stopped_by_two"
TRUNCATED = "truncated"


# ---------------------------------------------------------------------------
# stable increments

@dataclass
class StableSampler:
    """Counter-based stream of symmetric ``2s``-stable draws."""

    s: float
    seed: int = 0
    stream: int = 0
    counter: int = 0

    def __post_init__(self):
        check_exponent(self.s)
        self._key = _kernels.stream_key(self.seed, self.stream)

    @property
    def alpha(self):
        return 2.0 * self.s

    @property
    def key(self):
        return self._key

    def draw(self, n, eps=1.0):
        if eps <= 0:
            raise ConfigError("observation time must be positive")
        x = _kernels.stable_draws(self._key, self.counter, n, self.alpha)
        self.counter += n
        return eps ** (1.0 / self.alpha) * x


def sample_stable_increment(sampler, eps):
    """One draw with characteristic function ``exp(-eps |xi|^(2s))``."""
    return float(sampler.draw(1, eps)[0])


# ---------------------------------------------------------------------------
# transition kernel on a lattice

def kernel_cdf_tail(s, eps, eta):
    """Mass of the envelope density beyond ``eta >= 0``, as a fraction of one side."""
    c = eps ** (1.0 / (2.0 * s))
    t = np.asarray(eta, dtype=float) / c
    return betainc(s, 0.5, 1.0 / (1.0 + t * t))


@dataclass(frozen=True)
class KernelWeights:
    """Per-side lattice weights: ``w[0]`` for ``[0, h/2]``, ``w[k]`` for ``[kh - h/2, kh + h/2]``.

    ``tail`` is the mass beyond the last cell and ``rem[k]`` the mass from
    cell ``k`` outward, tail included.
    """

    w: np.ndarray
    tail: float
    rem: np.ndarray


def kernel_weights(s, eps, h, n_cells):
    check_exponent(s)
    if eps <= 0 or h <= 0 or n_cells < 1:
        raise ConfigError("kernel discretisation needs eps > 0, h > 0 and at least one cell")
    edges = (np.arange(n_cells + 1) + 0.5) * h
    beyond = kernel_cdf_tail(s, eps, edges)
    w = np.empty(n_cells + 1)
    w[0] = 1.0 - beyond[0]
    w[1:] = beyond[:-1] - beyond[1:]
    tail = float(beyond[-1])
    mass = w.sum() + tail
    if not np.isfinite(mass) or abs(mass - 1.0) > 1e-6:
        raise KernelMassError(f"discrete kernel mass {mass!r} deviates from 1")
    w /= mass
    tail /= mass
    rem = np.empty(n_cells + 1)
    rem[-1] = w[-1] + tail
    for k in range(n_cells - 1, -1, -1):
        rem[k] = rem[k + 1] + w[k]
    return KernelWeights(w, tail, rem)


def default_eps(h, s):
    """Grid coupling ``eps = h^(2s)``: the kernel scale equals one cell."""
    return h ** (2.0 * s)


# ---------------------------------------------------------------------------
# games

@dataclass
class GameConfig:
    variant: str
    dim: int
    eps: float
    max_turns: int = 10 ** 6
    inside: Optional[Callable] = None
    payoff: Optional[Callable] = None
    lower: Optional[Callable] = None
    upper: Optional[Callable] = None

    def __post_init__(self):
        if self.variant not in ("dirichlet", "obstacle"):
            raise ConfigError(f"unknown game variant {self.variant!r}")
        if self.eps <= 0:
            raise ConfigError("observation time must be positive")
        if self.max_turns < 1:
            raise ConfigError("max_turns must be positive")
        if self.variant == "dirichlet" and (self.inside is None or self.payoff is None):
            raise ConfigError("the exit game needs a domain predicate and payoff data")
        if self.variant == "obstacle" and (self.lower is None or self.upper is None):
            raise ConfigError("the stopping game needs both obstacles")


@dataclass
class GameState:
    x: np.ndarray
    n: int = 0
    status: str = RUNNING
    payoff: Optional[float] = None


def _scalar(fun, x):
    return float(np.asarray(fun(np.asarray(x, dtype=float)[None, :])).reshape(-1)[0])


def _unit(vec, dim, who):
    v = np.asarray(vec, dtype=float).reshape(-1)
    if v.size != dim or not np.all(np.isfinite(v)) or abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise PolicyError(f"{who} returned a non-unit direction {v!r}")
    return v


def play_episode(cfg, policy_one, policy_two, sampler, x0, stop_one=None, stop_two=None,
                 trace=None):
    """Play one game to termination.

    Policies map ``(x, n)`` to unit directions; stopping rules map ``(x, n)``
    to booleans and are consulted only in the stopping game.  When ``trace``
    is a list, one row per turn is appended.
    """
    dim = cfg.dim
    x = np.asarray(x0, dtype=float).reshape(dim).copy()
    if cfg.variant == "dirichlet" and not bool(np.asarray(cfg.inside(x[None, :])).reshape(-1)[0]):
        raise ConfigError("the exit game must start inside the domain")
    state = GameState(x=x)
    while True:
        n = state.n
        if cfg.variant == "obstacle":
            if stop_one is not None and stop_one(x, n):
                state.status, state.payoff = STOPPED_BY_ONE, _scalar(cfg.lower, x)
            elif stop_two is not None and stop_two(x, n):
                state.status, state.payoff = STOPPED_BY_TWO, _scalar(cfg.upper, x)
            if state.status != RUNNING:
                if trace is not None:
                    trace.append(_trace_row(n, x, None, None, 0.0, state.status))
                return state
        if n >= cfg.max_turns:
            state.status = TRUNCATED
            state.payoff = None
            if trace is not None:
                trace.append(_trace_row(n, x, None, None, 0.0, state.status))
            return state
        y = _unit(policy_one(x, n), dim, "player one")
        z = _unit(policy_two(x, n), dim, "player two")
        X = sample_stable_increment(sampler, cfg.eps)
        x = x + X * (y if X >= 0 else z)
        state.x = x
        state.n = n + 1
        if cfg.variant == "dirichlet" and not bool(np.asarray(cfg.inside(x[None, :])).reshape(-1)[0]):
            state.status, state.payoff = EXITED, _scalar(cfg.payoff, x)
        if trace is not None:
            trace.append(_trace_row(n, x, y, z, X, state.status))
        if state.status != RUNNING:
            return state


def _trace_row(n, x, y, z, X, status):
    dim = x.size
    y = np.full(dim, np.nan) if y is None else y
    z = np.full(dim, np.nan) if z is None else z
    return [n, *x.tolist(), *y.tolist(), *z.tolist(), float(X), status]


def write_trace_csv(path, rows, dim):
    head = (["turn"] + [f"x{i + 1}" for i in range(dim)] + [f"y{i + 1}" for i in range(dim)]
            + [f"z{i + 1}" for i in range(dim)] + ["increment", "status"])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(head)
        for r in rows:
            wr.writerow([r[0]] + [repr(float(v)) for v in r[1:-1]] + [r[-1]])


# ---------------------------------------------------------------------------
# discrete problems

class LineProblem:
    """Nodes ``lo + i h`` on a line, exterior data off the node range.

    ``lower``/``upper`` clamp the update (stopping game); ``floor`` is a
    pointwise lower bound used for Perron-type iteration.
    """

    dim = 1

    def __init__(self, lo, h, n, exterior, lower=None, upper=None, floor=None, far_cells=None,
                 interval=None):
        if n < 1 or h <= 0:
            raise ConfigError("a line problem needs at least one node and h > 0")
        self.lo = float(lo)
        self.h = float(h)
        self.n = int(n)
        self.exterior = exterior
        self.nodes = self.lo + self.h * np.arange(self.n)
        self.lower = None if lower is None else np.asarray(lower, dtype=float)
        self.upper = None if upper is None else np.asarray(upper, dtype=float)
        self.floor = None if floor is None else np.asarray(floor, dtype=float)
        if self.lower is not None and self.upper is not None and np.any(self.lower > self.upper):
            raise ConfigError("lower obstacle exceeds upper obstacle")
        self.far_cells = int(far_cells or max(4 * self.n, 4096))
        self.interval = interval
        self._cache = {}

    @property
    def grid(self):
        return {"lo": [self.lo], "h": [self.h], "shape": [self.n], "periodic": [False]}

    def coords(self):
        return self.nodes[:, None]

    def exterior_values(self, x):
        return np.asarray(self.exterior(np.asarray(x, dtype=float)), dtype=float).reshape(-1)

    def data_range(self):
        far = self.lo + self.h * np.concatenate([np.arange(-self.far_cells - 1, 0),
                                                 np.arange(self.n, self.n + self.far_cells + 1)])
        vals = [self.exterior_values(far)]
        for arr in (self.lower, self.upper, self.floor):
            if arr is not None:
                vals.append(arr)
        allv = np.concatenate(vals)
        return float(allv.min()), float(allv.max())

    def _setup(self, s, eps):
        key = (float(s), float(eps))
        if key in self._cache:
            return self._cache[key]
        K = self.far_cells
        kw = kernel_weights(s, eps, self.h, K)
        n = self.n
        idx = np.arange(-K - 1, n + K + 1)
        ext = np.zeros(idx.size)
        out = (idx < 0) | (idx >= n)
        ext[out] = self.exterior_values(self.lo + self.h * idx[out])
        off = K + 1
        w_right = np.zeros(K + 1)
        w_right[1:] = kw.w[1:]
        # E_R[i] = sum_{k=1..K} w_k ext[i+k] + tail * ext[i+K+1]
        conv = fftconvolve(ext, w_right[::-1], mode="full")
        E_R = conv[off + K: off + K + n].copy()
        E_R += kw.tail * ext[off + K + 1: off + K + 1 + n]
        conv = fftconvolve(ext, w_right, mode="full")
        E_L = conv[off: off + n].copy()
        E_L += kw.tail * ext[off - K - 1: off - K - 1 + n]
        wi = np.zeros(n)
        wi[1:] = kw.w[1:n]
        setup = {"w": kw, "E_R": E_R, "E_L": E_L, "wi": wi}
        self._cache[key] = setup
        return setup

    def directional_sums(self, V, s, eps):
        """``A(+1)`` and ``A(-1)`` at every node: the averaged continuation along each ray."""
        st = self._setup(s, eps)
        n = self.n
        w0 = st["w"].w[0]
        if n > 1:
            R_int = _right_sums(V, st["wi"])
            L_int = _left_sums(V, st["wi"])
        else:
            R_int = L_int = np.zeros(1)
        R = w0 * V + R_int + st["E_R"]
        L = w0 * V + L_int + st["E_L"]
        return R, L

    def sweep(self, V, s, eps):
        R, L = self.directional_sums(V, s, eps)
        # sup over y of inf over z of (A(y) + A(-z)) / 2 on the set {+1, -1}
        new = 0.5 * (np.maximum(R, L) + np.minimum(R, L))
        return self.project(new)

    def project(self, new):
        if self.upper is not None:
            new = np.minimum(new, self.upper)
        if self.lower is not None:
            new = np.maximum(new, self.lower)
        if self.floor is not None:
            new = np.maximum(new, self.floor)
        return new

    def interpolate(self, V, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        out = np.empty(x.size)
        fi = (x - self.lo) / self.h
        inside = (fi >= 0) & (fi <= self.n - 1)
        if np.any(~inside):
            out[~inside] = self.exterior_values(x[~inside])
        if np.any(inside):
            out[inside] = np.interp(x[inside], self.nodes, V)
        return out

    def start_values(self):
        """Monotone starting table: the lower obstacle or the Perron floor, else the minimum of the data."""
        if self.lower is not None:
            return self.project(self.lower.copy())
        if self.floor is not None:
            return self.project(self.floor.copy())
        lo, _ = self.data_range()
        return self.project(np.full(self.n, lo))


def interval_problem(a, b, h, exterior, floor=None):
    """Exit problem on ``(a, b)``: nodes strictly inside, data ``exterior`` outside."""
    n = int(round((b - a) / h)) - 1
    if n < 1 or abs((n + 1) * h - (b - a)) > 1e-9 * (b - a):
        raise ConfigError("interval length must be a multiple of h with at least one interior node")
    return LineProblem(a + h, h, n, exterior, floor=floor, interval=(float(a), float(b)))


def _right_sums(V, wi):
    """``R[i] = sum_k wi[k] V[i+k]``."""
    n = V.size
    return fftconvolve(V[::-1], wi, mode="full")[:n][::-1]


def _left_sums(V, wi):
    """``L[i] = sum_k wi[k] V[i-k]``."""
    n = V.size
    return fftconvolve(V, wi, mode="full")[:n]


class StripProblem:
    """Periodic-in-``x2`` strip grid between two sinusoidal graphs.

    ``g1``/``g2`` are ``(c, a, omega, phase)`` describing
    ``x1 = c + a sin(omega x2 + phase)``; data are 0 below the first graph
    and 1 above the second.  Nodes lie at ``(x1lo + i h, j h)``.
    """

    dim = 2

    def __init__(self, g1, g2, h, period, n_dirs=32, far_cells=256, floor=None):
        self.g1 = np.asarray(g1, dtype=float)
        self.g2 = np.asarray(g2, dtype=float)
        self.h = float(h)
        self.period = float(period)
        n2 = int(round(self.period / self.h))
        if abs(n2 * self.h - self.period) > 1e-9 * self.period:
            raise ConfigError("the x2 period must be a multiple of h")
        self.bottom = float(self.g1[0] - abs(self.g1[1]))
        self.top = float(self.g2[0] + abs(self.g2[1]))
        i_lo = int(np.floor(self.bottom / self.h)) - 1
        i_hi = int(np.ceil(self.top / self.h)) + 1
        self.x1lo = i_lo * self.h
        n1 = i_hi - i_lo + 1
        self.shape = (n1, n2)
        self.dirs = sphere_directions(2, n_dirs)
        self.far_cells = int(far_cells)
        X1, X2 = self.mesh()
        self.inside = (X1 > self._graph(self.g1, X2)) & (X1 < self._graph(self.g2, X2))
        self.free_i, self.free_j = np.nonzero(self.inside)
        self.floor = None if floor is None else np.asarray(floor, dtype=float)
        self._cache = {}

    @staticmethod
    def _graph(g, x2):
        return g[0] + g[1] * np.sin(g[2] * x2 + g[3])

    def mesh(self):
        n1, n2 = self.shape
        x1 = self.x1lo + self.h * np.arange(n1)
        x2 = self.h * np.arange(n2)
        return np.meshgrid(x1, x2, indexing="ij")

    @property
    def grid(self):
        return {"lo": [self.x1lo, 0.0], "h": [self.h, self.h], "shape": list(self.shape),
                "periodic": [False, True]}

    def coords(self):
        X1, X2 = self.mesh()
        return np.column_stack([X1.ravel(), X2.ravel()])

    def exterior_table(self):
        X1, X2 = self.mesh()
        return np.where(X1 >= self._graph(self.g2, X2), 1.0, 0.0)

    def data_range(self):
        return 0.0, 1.0

    def _weights(self, s, eps):
        key = (float(s), float(eps))
        if key not in self._cache:
            self._cache[key] = kernel_weights(s, eps, self.h, self.far_cells)
        return self._cache[key]

    def _floor_table(self):
        if self.floor is None:
            return np.full(self.shape, -np.inf)
        return self.floor

    def sweep(self, V, s, eps):
        kw = self._weights(s, eps)
        out, _ = _kernels.strip_sweep(V, self.free_i, self.free_j, self._floor_table(), self.x1lo,
                                      self.h, self.period, self.dirs, kw.w, kw.rem, kw.tail,
                                      self.g1, self.g2, self.top, self.bottom)
        return out

    def directional_sums(self, V, s, eps, nodes):
        """``A(d)`` for every direction ``d`` at the given ``(i, j)`` nodes."""
        kw = self._weights(s, eps)
        nodes = np.atleast_2d(np.asarray(nodes, dtype=np.int64))
        fi, fj = nodes[:, 0], nodes[:, 1]
        x1 = self.x1lo + fi * self.h
        x2 = fj * self.h
        A = np.empty((self.dirs.shape[0], fi.size))
        for k, (d1, d2) in enumerate(self.dirs):
            acc = kw.w[0] * V[fi, fj]
            alive = np.ones(fi.size, dtype=bool)
            for m in range(1, kw.w.size):
                p1 = x1 + m * self.h * d1
                if d1 > 0:
                    up = alive & (p1 >= self.top)
                    acc = np.where(up, acc + kw.rem[m], acc)
                    alive &= ~up
                elif d1 < 0:
                    alive &= ~(p1 <= self.bottom)
                if not alive.any():
                    break
                val = _kernels._strip_value_np(V, p1, x2 + m * self.h * d2, self.x1lo, self.h,
                                               self.period, self.g1, self.g2)
                acc = np.where(alive, acc + kw.w[m] * val, acc)
            if alive.any():
                m = kw.w.size
                val = _kernels._strip_value_np(V, x1 + m * self.h * d1, x2 + m * self.h * d2,
                                               self.x1lo, self.h, self.period, self.g1, self.g2)
                acc = np.where(alive, acc + kw.tail * val, acc)
            A[k] = acc
        return A

    def interpolate(self, V, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return _kernels._strip_value_np(V, pts[:, 0], pts[:, 1], self.x1lo, self.h, self.period,
                                        self.g1, self.g2)

    def start_values(self):
        V = self.exterior_table()
        if self.floor is not None:
            V = np.where(self.inside, np.maximum(V, self.floor), V)
        return V


# ---------------------------------------------------------------------------
# value tables

@dataclass
class ValueTable:
    problem: object
    values: np.ndarray
    s: float
    eps: float
    residuals: list = field(default_factory=list)

    @property
    def grid(self):
        return self.problem.grid

    @property
    def sweeps(self):
        return len(self.residuals)

    def at(self, pts):
        return self.problem.interpolate(self.values, pts)

    def within_data_range(self, slack=1e-12):
        lo, hi = self.problem.data_range()
        return bool(np.all(self.values >= lo - slack) and np.all(self.values <= hi + slack))


def dpp_update(V, s=None, eps=None):
    """One Jacobi sweep of the dynamic-programming operator."""
    s = V.s if s is None else s
    eps = V.eps if eps is None else eps
    new = V.problem.sweep(V.values, s, eps)
    resid = float(np.max(np.abs(new - V.values))) if new.size else 0.0
    return ValueTable(V.problem, new, s, eps, V.residuals + [resid])


def value_iterate(problem, s, eps=None, tol=1e-10, max_sweeps=100000, start=None,
                  raise_on_fail=True):
    """Iterate the dynamic-programming operator to a fixed point.

    Starts from ``start`` or from ``problem.start_values()`` (exterior data,
    the lower obstacle, or the Perron floor).  Raises
    :class:`NoConvergence` when the sup-norm change stays above ``tol``.
    """
    check_exponent(s)
    if tol <= 0:
        raise ConfigError("tolerance must be positive")
    eps = default_eps(problem.h, s) if eps is None else float(eps)
    values = problem.start_values() if start is None else np.asarray(start, dtype=float).copy()
    residuals = []
    for _ in range(int(max_sweeps)):
        new = problem.sweep(values, s, eps)
        resid = float(np.max(np.abs(new - values))) if new.size else 0.0
        residuals.append(resid)
        values = new
        if resid < tol:
            return ValueTable(problem, values, s, eps, residuals)
    table = ValueTable(problem, values, s, eps, residuals)
    if raise_on_fail:
        err = NoConvergence(f"residual {residuals[-1]:.3e} >= tol {tol:.1e} after {max_sweeps} sweeps")
        err.table = table
        raise err
    return table


# ---------------------------------------------------------------------------
# value-greedy policies and Monte Carlo

def greedy_direction_tables(table):
    """Per-node greedy directions ``(y, z)`` of a line problem (entries +1 or -1)."""
    R, L = table.problem.directional_sums(table.values, table.s, table.eps)
    y = np.where(R >= L, 1.0, -1.0)
    # z minimises A(-z): z = +1 uses the left ray
    z = np.where(L <= R, 1.0, -1.0)
    return y, z


def greedy_policies(table):
    """Policies and stopping rules induced by a value table (nearest node)."""
    prob = table.problem
    if isinstance(prob, LineProblem):
        y, z = greedy_direction_tables(table)
        R, L = prob.directional_sums(table.values, table.s, table.eps)
        cont = 0.5 * (R + L)

        def node(x):
            return int(np.clip(np.rint((x[0] - prob.lo) / prob.h), 0, prob.n - 1))

        def pol_one(x, n):
            return np.array([y[node(x)]])

        def pol_two(x, n):
            return np.array([z[node(x)]])

        def stop_one(x, n):
            return prob.lower is not None and prob.lower[node(x)] > cont[node(x)]

        def stop_two(x, n):
            return prob.upper is not None and prob.upper[node(x)] < cont[node(x)]

        return pol_one, pol_two, stop_one, stop_two
    if isinstance(prob, StripProblem):
        cache = {}

        def sums(x):
            i = int(np.clip(np.rint((x[0] - prob.x1lo) / prob.h), 0, prob.shape[0] - 1))
            j = int(np.rint(x[1] / prob.h)) % prob.shape[1]
            if (i, j) not in cache:
                A = prob.directional_sums(table.values, table.s, table.eps, [(i, j)])[:, 0]
                cache[(i, j)] = A
            return cache[(i, j)]

        def pol_one(x, n):
            return prob.dirs[int(np.argmax(sums(x)))]

        def pol_two(x, n):
            # inf over z of A(-z): pick the direction opposite to the smallest ray sum
            return -prob.dirs[int(np.argmin(sums(x)))]

        return pol_one, pol_two, None, None
    raise ConfigError("greedy policies need a line or strip value table")


@dataclass
class MCEstimate:
    value: float
    half_width: float
    stdev: float
    n_episodes: int
    truncated: int
    mean_turns: float


def _summarise(payoffs, antithetic, truncated, turns):
    payoffs = np.asarray(payoffs, dtype=float)
    n = payoffs.size
    if antithetic:
        pairs = 0.5 * (payoffs[0::2] + payoffs[1::2])
        sd = float(np.std(pairs, ddof=1)) if pairs.size > 1 else 0.0
        hw = 2.58 * sd / np.sqrt(pairs.size)
        sd_per = sd * np.sqrt(2.0)
    else:
        sd = float(np.std(payoffs, ddof=1)) if n > 1 else 0.0
        hw = 2.58 * sd / np.sqrt(n)
        sd_per = sd
    return MCEstimate(float(payoffs.mean()), float(hw), sd_per, n, int(truncated),
                      float(np.mean(turns)))


def episode_keys(seed, n_episodes, antithetic=False):
    """Per-episode stream keys and draw signs; antithetic pairs share a key."""
    if antithetic:
        half = (n_episodes + 1) // 2
        base = np.array([_kernels.stream_key(seed, e) for e in range(half)], dtype=np.uint64)
        keys = np.repeat(base, 2)[:n_episodes]
        signs = np.tile([1.0, -1.0], half)[:n_episodes]
    else:
        keys = np.array([_kernels.stream_key(seed, e) for e in range(n_episodes)], dtype=np.uint64)
        signs = np.ones(n_episodes)
    return keys, signs


def mc_value(cfg, x0, n_episodes, table=None, policies=None, seed=0, antithetic=False, s=None):
    """Monte-Carlo value of the game from ``x0`` under value-greedy play.

    One-dimensional exit games with a line table use a compiled episode
    loop; everything else goes through :func:`play_episode`.
    """
    if antithetic and n_episodes % 2:
        raise ConfigError("antithetic runs need an even number of episodes")
    if table is not None:
        s = table.s
    if s is None:
        raise ConfigError("mc_value needs the exponent: pass a value table or s")
    fast = (table is not None and isinstance(table.problem, LineProblem)
            and cfg.variant == "dirichlet" and cfg.dim == 1 and policies is None
            and getattr(table.problem, "interval", None) is not None)
    if fast:
        prob = table.problem
        y, z = greedy_direction_tables(table)
        a, b = prob.interval
        keys, signs = episode_keys(seed, n_episodes, antithetic)
        exits, turns, trunc = _kernels.run_interval_episodes(
            keys, signs, float(np.asarray(x0).reshape(-1)[0]), a, b, cfg.eps ** (1.0 / (2 * s)),
            2 * s, y, z, prob.lo, prob.h, cfg.max_turns)
        pay = np.asarray(cfg.payoff(exits[:, None]), dtype=float).reshape(-1)
        pay = np.where(trunc, np.nan, pay)
        ok = ~trunc
        if antithetic:
            ok = np.repeat(ok[0::2] & ok[1::2], 2)
        return _summarise(pay[ok], antithetic, int(trunc.sum()), turns)
    if policies is None:
        if table is None:
            raise ConfigError("mc_value needs a value table or explicit policies")
        policies = greedy_policies(table)
    pol_one, pol_two, stop_one, stop_two = (tuple(policies) + (None, None))[:4]
    payoffs, turns, n_trunc = [], [], 0
    keys, signs = episode_keys(seed, n_episodes, antithetic)
    for e in range(n_episodes):
        stream = e // 2 if antithetic else e
        sampler = _SignedSampler(s, seed, stream, signs[e])
        st = play_episode(cfg, pol_one, pol_two, sampler, x0, stop_one, stop_two)
        turns.append(st.n)
        if st.status == TRUNCATED:
            n_trunc += 1
            payoffs.append(np.nan)
        else:
            payoffs.append(st.payoff)
    pay = np.asarray(payoffs)
    ok = np.isfinite(pay)
    if antithetic:
        ok = np.repeat(ok[0::2] & ok[1::2], 2)
    return _summarise(pay[ok], antithetic, n_trunc, turns)


class _SignedSampler(StableSampler):
    def __init__(self, s, seed, stream, sign):
        super().__init__(s, seed, stream)
        self.sign = float(sign)

    def draw(self, n, eps=1.0):
        return self.sign * super().draw(n, eps)
