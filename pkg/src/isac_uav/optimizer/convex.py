"""Linear objective over an intersection of 2-D balls and half-spaces.

The decision vector stacks M planar points, x = (q_1, ..., q_M). Each ball
constrains one point; half-spaces may couple any coordinates.

Two solvers share the problem description. When no coupling half-space is
binding, each point's sub-problem is a linear objective over disks and
half-planes in the plane, solved exactly by enumerating its possible optimal
vertices. Otherwise a log-barrier Newton method runs, preceded by a phase-I
solve when the start point is not strictly feasible. Problem sizes are tiny
(2M variables, O(M^2) constraints), so dense linear algebra is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dposv

class InfeasibleRegionError(ValueError):
    def __init__(self, message: str, violated: list[str]):
        super().__init__(message)
        self.violated = violated


@dataclass
class ConvexProgram:
    num_points: int
    ball_point: list[int] = field(default_factory=list)
    ball_center: list[np.ndarray] = field(default_factory=list)
    ball_radius: list[float] = field(default_factory=list)
    ball_label: list[str] = field(default_factory=list)
    lin_a: list[np.ndarray] = field(default_factory=list)
    lin_b: list[float] = field(default_factory=list)
    lin_label: list[str] = field(default_factory=list)
    lin_point: list[int] = field(default_factory=list)  # -1 when coupling

    def add_ball(self, point: int, center, radius: float, label: str) -> None:
        if not np.isfinite(radius):
            return
        if radius <= 0:
            raise InfeasibleRegionError(f"{label}: empty ball (radius {radius:g})", [label])
        self.ball_point.append(point)
        self.ball_center.append(np.asarray(center, dtype=float))
        self.ball_radius.append(float(radius))
        self.ball_label.append(label)

    def add_halfspace(self, a, b: float, label: str) -> None:
        """a . x <= b, stored with a unit-norm row."""
        a = np.asarray(a, dtype=float)
        nrm = np.linalg.norm(a)
        if nrm == 0:
            if b < 0:
                raise InfeasibleRegionError(f"{label}: 0 <= {b:g} violated", [label])
            return
        self.lin_a.append(a / nrm)
        self.lin_b.append(b / nrm)
        self.lin_label.append(label)
        touched = np.unique(np.flatnonzero(a) // 2)
        self.lin_point.append(int(touched[0]) if len(touched) == 1 else -1)

    @property
    def labels(self) -> list[str]:
        return self.ball_label + self.lin_label

    def _arrays(self):
        n = 2 * self.num_points
        nb = len(self.ball_radius)
        pts = np.array(self.ball_point, dtype=int)
        cols = np.stack([2 * pts, 2 * pts + 1], axis=1) if nb else np.zeros((0, 2), dtype=int)
        centers = np.array(self.ball_center).reshape(nb, 2)
        radii = np.array(self.ball_radius)
        A = np.array(self.lin_a).reshape(len(self.lin_b), n)
        b = np.array(self.lin_b)
        return cols, centers, radii, A, b

    def constraint_values(self, x) -> np.ndarray:
        """Scaled constraint functions, feasible iff all <= 0.

        Balls use (|q - c|^2 - R^2) / (2R), roughly a signed distance near the boundary.
        """
        x = np.asarray(x, dtype=float)
        cols, centers, radii, A, b = self._arrays()
        diff = x[cols] - centers
        ball = (np.sum(diff * diff, axis=1) - radii**2) / (2 * radii)
        return np.concatenate([ball, A @ x - b])


@dataclass
class SolveInfo:
    status: str
    newton_steps: int = 0
    outer_steps: int = 0
    gap: float = float("nan")
    kkt_residual: float = float("nan")
    phase1_steps: int = 0


class _Barrier:
    """Barrier machinery over z = (x, [s]) where s is the phase-I slack."""

    def __init__(self, prog: ConvexProgram, with_slack: bool):
        self.cols, self.centers, self.radii, self.A, self.b = prog._arrays()
        self.n = 2 * prog.num_points
        self.with_slack = with_slack
        self.nz = self.n + int(with_slack)
        self.nb = len(self.radii)
        self.ncon = self.nb + len(self.b)
        rows = np.arange(self.nb)[:, None]
        self._ball_flat = (rows * self.nz + self.cols).ravel()
        self._Gc = np.zeros((self.ncon, self.nz))
        self._Gc[self.nb:, : self.n] = self.A
        if with_slack:
            self._Gc[:, -1] = -1.0
        self._r2 = self.radii**2
        self._inv2r = 0.5 / self.radii
        self._diag = np.diag_indices(self.nz)

    def values(self, z):
        x = z[: self.n]
        diff = x[self.cols] - self.centers
        out = np.empty(self.ncon)
        out[: self.nb] = ((diff * diff).sum(axis=1) - self._r2) * self._inv2r
        out[self.nb:] = self.A @ x - self.b
        if self.with_slack:
            out -= z[-1]
        return out, diff

    def grad_hess(self, z, fvals, diff):
        Gc = self._Gc.copy()
        Gc.flat[self._ball_flat] = (diff / self.radii[:, None]).ravel()
        inv = -1.0 / fvals  # > 0 in the interior
        grad = Gc.T @ inv
        hess = (Gc * (inv**2)[:, None]).T @ Gc
        curv = np.repeat(inv[: self.nb] / self.radii, 2)
        hess[self._diag] += np.bincount(self.cols.ravel(), curv, minlength=self.nz)
        return grad, hess, Gc, inv


def _newton_centering(bar: _Barrier, c, z, t, max_steps=60, tol=1e-9):
    steps = 0
    fvals, diff = bar.values(z)
    phi = t * (c @ z) - np.log(-fvals).sum()
    for _ in range(max_steps):
        g_b, H, _, _ = bar.grad_hess(z, fvals, diff)
        grad = t * c + g_b
        _, sol, info = dposv(H, grad)
        dz = -sol if info == 0 else -np.linalg.lstsq(H, grad, rcond=None)[0]
        lam2 = -(grad @ dz)
        steps += 1
        if lam2 / 2.0 <= tol:
            break
        step = 1.0
        while True:
            zn = z + step * dz
            fn, dn = bar.values(zn)
            if (fn < 0).all():
                phin = t * (c @ zn) - np.log(-fn).sum()
                if phin <= phi - 0.25 * step * lam2:
                    break
            step *= 0.5
            if step < 1e-14:
                return z, fvals, diff, steps
        stalled = phi - phin <= 1e-14 * max(abs(phi), 1.0)
        z, fvals, diff, phi = zn, fn, dn, phin
        if stalled:  # decrement is at rounding level
            break
    return z, fvals, diff, steps


def _phase_one(prog: ConvexProgram, x0: np.ndarray, margin: float):
    """Return a strictly feasible point (all scaled constraints <= -margin)."""
    bar = _Barrier(prog, with_slack=True)
    f0, _ = _Barrier(prog, with_slack=False).values(x0)
    z = np.concatenate([x0, [max(f0.max(), 0.0) + 1.0]])
    c = np.zeros(bar.nz)
    c[-1] = 1.0
    t = 1.0
    steps = 0
    for _ in range(40):
        z, fvals, _, k = _newton_centering(bar, c, z, t, tol=1e-10)
        steps += k
        if z[-1] < -margin:
            return z[: bar.n], steps
        if bar.ncon / t < 1e-10:
            break
        t *= 20.0
    fx, _ = _Barrier(prog, with_slack=False).values(z[: bar.n])
    labels = prog.labels
    worst = np.argsort(-fx)
    violated = [labels[i] for i in worst if fx[i] > -margin]
    raise InfeasibleRegionError(
        f"feasible region is empty (best max-violation {z[-1]:.3g}); "
        f"tightest constraints: {violated[:6]}", violated)


def _circle_circle(c1, r1, c2, r2):
    d_vec = c2 - c1
    d = float(np.hypot(*d_vec))
    if d == 0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1**2 - r2**2 + d**2) / (2 * d)
    h = np.sqrt(max(r1**2 - a**2, 0.0))
    base = c1 + a * d_vec / d
    perp = np.array([-d_vec[1], d_vec[0]]) / d
    return [base + h * perp, base - h * perp]


def _circle_line(c, r, a, b):
    # a unit normal: points on a . q = b
    dist = b - a @ c
    if abs(dist) > r:
        return []
    foot = c + dist * a
    h = np.sqrt(max(r**2 - dist**2, 0.0))
    tang = np.array([-a[1], a[0]])
    return [foot + h * tang, foot - h * tang]


def _solve_point(cost2, disks, lines, start, tol):
    """Exact minimizer of cost2 . q over disks and half-planes in the plane."""
    def feasible(q):
        return (all(np.hypot(*(q - c)) <= r + tol * max(r, 1.0) for c, r in disks)
                and all(a @ q <= b + tol for a, b in lines))

    nrm = np.hypot(*cost2)
    if nrm == 0:
        if feasible(start):
            return start
        cands = [c for c, _ in disks]
    else:
        g = cost2 / nrm
        cands = [c - r * g for c, r in disks]
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            cands += _circle_circle(*disks[i], *disks[j])
        for a, b in lines:
            cands += _circle_line(*disks[i], a, b)
    best, best_val = None, np.inf
    for q in cands:
        if feasible(q):
            val = cost2 @ q
            if val < best_val - 1e-12 * max(abs(best_val), 1.0) if np.isfinite(best_val) else True:
                best, best_val = q, val
    return best


def solve_separable(prog: ConvexProgram, cost, x0, tol: float = 1e-10):
    """Solve ignoring coupling half-spaces; None when any point's sub-problem is empty."""
    cost = np.asarray(cost, dtype=float).ravel()
    x0 = np.asarray(x0, dtype=float).ravel()
    out = np.empty_like(x0)
    for m in range(prog.num_points):
        disks = [(c, r) for p, c, r in zip(prog.ball_point, prog.ball_center, prog.ball_radius)
                 if p == m]
        lines = [(a[2 * m: 2 * m + 2], b) for a, b, p in zip(prog.lin_a, prog.lin_b, prog.lin_point)
                 if p == m]
        if not disks:
            return None
        q = _solve_point(cost[2 * m: 2 * m + 2], disks, lines, x0[2 * m: 2 * m + 2], tol)
        if q is None:
            return None
        out[2 * m: 2 * m + 2] = q
    return out


def solve_linear_program(prog: ConvexProgram, cost, x0, gap_tol: float = 1e-8,
                         mu: float = 50.0) -> tuple[np.ndarray, SolveInfo]:
    """Minimize cost . x over the program's feasible set, warm-started at x0.

    Tries the exact separable solve first; its answer is optimal whenever it
    also satisfies the coupling half-spaces. Otherwise the barrier method stops
    when the duality gap on the unit-normalized cost is below ``gap_tol``.
    A zero cost returns a feasible point.
    """
    cost = np.asarray(cost, dtype=float).ravel()
    x = np.asarray(x0, dtype=float).ravel().copy()
    coupled = [i for i, p in enumerate(prog.lin_point) if p < 0]
    xs = solve_separable(prog, cost, x)
    if xs is not None:
        A = np.array([prog.lin_a[i] for i in coupled]).reshape(len(coupled), x.size)
        b = np.array([prog.lin_b[i] for i in coupled])
        if np.all(A @ xs <= b + 1e-10):
            return xs, SolveInfo(status="optimal", gap=0.0, kkt_residual=0.0)
    return solve_barrier(prog, cost, x, gap_tol=gap_tol, mu=mu)


def solve_barrier(prog: ConvexProgram, cost, x0, gap_tol: float = 1e-8,
                  mu: float = 50.0) -> tuple[np.ndarray, SolveInfo]:
    cost = np.asarray(cost, dtype=float).ravel()
    x = np.asarray(x0, dtype=float).ravel().copy()
    info = SolveInfo(status="optimal")
    scale = max(float(np.min(prog.ball_radius, initial=np.inf)), 1.0)
    margin = 1e-9 * scale
    bar = _Barrier(prog, with_slack=False)
    if bar.ncon == 0:
        raise ValueError("unbounded: no constraints")
    fvals, _ = bar.values(x)
    if not np.all(fvals < -margin):
        x, info.phase1_steps = _phase_one(prog, x, margin)
    nrm = np.linalg.norm(cost)
    if nrm == 0:
        info.gap = 0.0
        info.kkt_residual = 0.0
        return x, info
    c = cost / nrm
    t = bar.ncon / scale
    while True:
        x, fvals, diff, k = _newton_centering(bar, c, x, t)
        info.newton_steps += k
        info.outer_steps += 1
        gap = bar.ncon / t
        if gap <= gap_tol or info.outer_steps > 60:
            break
        t *= mu
    lam = -1.0 / (t * fvals)
    _, _, Gc, _ = bar.grad_hess(x, fvals, diff)
    info.gap = gap
    info.kkt_residual = float(np.linalg.norm(c + Gc.T @ lam))
    if gap > gap_tol:
        info.status = "gap_not_reached"
    return x, info
