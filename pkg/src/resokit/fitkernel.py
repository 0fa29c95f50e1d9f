"""Damped least-squares refinement of MBVD models.

The engine is a Levenberg-Marquardt loop over log-space parameters
[ln c0, ln r0, ln rs] + per branch [ln rm, ln fs, ln cm], where lm is
eliminated through lm = 1/((2 pi fs)^2 cm) so the branch frequency is a
direct parameter.  Positivity is free in log space; box bounds are
enforced by projection.  The Jacobian is analytic.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import FitError
from .extract import ResonanceCandidate, initial_guess
from .mbvd import TWO_PI, MbvdModel, MotionalBranch
from .netparams import ComplexTrace

_R_FLOOR = 1e-3
_R_CEIL = 1e6
_LAMBDA_MAX = 1e12
_LAMBDA_MIN = 1e-12

WEIGHTINGS = ("complex", "log_mag_phase")


@dataclass(frozen=True)
class FitOptions:
    """Engine knobs.

    bounds is an (nparams, 2) array of [lo, hi] in natural units, rows
    ordered like the parameter vector; None means default_bounds(seed).
    Rows with lo == hi freeze that parameter.
    """

    max_iter: int = 200
    ftol: float = 1e-10
    xtol: float = 1e-10
    weighting: str = "complex"
    lambda0: float = 1e-3
    bounds: np.ndarray | None = None

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.ftol > 0 and self.xtol > 0 and self.lambda0 > 0):
            raise ValueError("ftol, xtol and lambda0 must be positive")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")


@dataclass(frozen=True)
class FitResult:
    """Refined model plus convergence bookkeeping.

    cost is the sum of squared residuals at the solution, cost_trace the
    accepted-step history (non-increasing), covariance the linearized
    parameter covariance in log space (rows/cols of frozen parameters are
    zero), residual_rms = sqrt(cost / nresiduals).
    """

    model: MbvdModel
    cost: float
    iterations: int
    converged: bool
    covariance: np.ndarray
    residual_rms: float
    cost_trace: tuple[float, ...] = field(repr=False, default=())


def param_names(n_branches: int) -> list[str]:
    names = ["c0", "r0", "rs"]
    for k in range(n_branches):
        names += [f"b{k}.rm", f"b{k}.fs", f"b{k}.cm"]
    return names


def _resistance_lo(r_seed: float) -> float:
    # The box must contain the seed: a seed below the nominal 1e-3 ohm
    # floor (for example a deliberately lossless generator) lowers the
    # edge to an effective zero instead of displacing the seed.
    if r_seed >= _R_FLOOR:
        return _R_FLOOR
    return max(r_seed, 1e-30)


def default_bounds(seed: MbvdModel) -> np.ndarray:
    """Search box: c0 within x3, resistances in [1e-3, 1e6] ohm (edge
    lowered to cover lossless seeds), branch fs within +-10% of seed,
    cm within x1e4."""
    rows = [
        (seed.c0 / 3.0, seed.c0 * 3.0),
        (_resistance_lo(seed.r0), _R_CEIL),
        (_resistance_lo(seed.rs), _R_CEIL),
    ]
    for b in seed.branches:
        fs = b.fs
        rows.append((_resistance_lo(b.rm), _R_CEIL))
        rows.append((0.9 * fs, 1.1 * fs))
        rows.append((b.cm / 1e4, b.cm * 1e4))
    return np.asarray(rows, dtype=float)


def _pack(model: MbvdModel) -> np.ndarray:
    tiny = 1e-300
    theta = [
        math.log(model.c0),
        math.log(max(model.r0, tiny)),
        math.log(max(model.rs, tiny)),
    ]
    for b in model.branches:
        theta += [math.log(max(b.rm, tiny)), math.log(b.fs), math.log(b.cm)]
    return np.asarray(theta)


def _unpack(theta: np.ndarray) -> tuple[float, float, float, np.ndarray, np.ndarray, np.ndarray]:
    k = (theta.size - 3) // 3
    c0, r0, rs = np.exp(theta[:3])
    rm = np.exp(theta[3 : 3 + 3 * k : 3])
    fs = np.exp(theta[4 : 4 + 3 * k : 3])
    cm = np.exp(theta[5 : 5 + 3 * k : 3])
    return float(c0), float(r0), float(rs), rm, fs, cm


def _model_from_theta(theta: np.ndarray) -> MbvdModel:
    c0, r0, rs, rm, fs, cm = _unpack(theta)
    lm = 1.0 / ((TWO_PI * fs) ** 2 * cm)
    branches = sorted(
        (MotionalBranch(rm=float(r), lm=float(l), cm=float(c)) for r, l, c in zip(rm, lm, cm)),
        key=lambda b: b.fs,
    )
    return MbvdModel(c0=c0, r0=r0, rs=rs, branches=tuple(branches))


def _y_and_grads(
    freqs: np.ndarray,
    c0: float,
    r0: float,
    rs: float,
    rm: np.ndarray,
    fs: np.ndarray,
    cm: np.ndarray,
    want_grads: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Admittance and, optionally, dY/d(ln p) for every parameter.

    Gradient column order matches the packed parameter vector.
    """
    w = TWO_PI * freqs
    jw = 1j * w
    k = rm.size
    lm = 1.0 / ((TWO_PI * fs) ** 2 * cm)

    zst = r0 + 1.0 / (jw * c0)
    yst = 1.0 / zst
    if k:
        zb = rm[None, :] + 1j * (w[:, None] * lm[None, :] - 1.0 / (w[:, None] * cm[None, :]))
        yb = 1.0 / zb
        g_tot = yst + np.sum(yb, axis=1)
    else:
        g_tot = yst
    y = 1.0 / (rs + 1.0 / g_tot) if rs != 0.0 else g_tot

    if not want_grads:
        return y, None

    # dY/dG for parameters inside the parallel section, dY/drs outside.
    y_sq = y * y
    dy_dg = y_sq / (g_tot * g_tot)
    grads = np.empty((freqs.size, 3 + 3 * k), dtype=complex)
    yst_sq = yst * yst
    grads[:, 0] = dy_dg * (yst_sq / (jw * c0 * c0)) * c0          # d/d ln c0
    grads[:, 1] = dy_dg * (-yst_sq) * r0                           # d/d ln r0
    grads[:, 2] = (-y_sq) * rs                                     # d/d ln rs
    for i in range(k):
        yb_sq = yb[:, i] * yb[:, i]
        dzb_dfs = -2j * w * lm[i] / fs[i]
        dzb_dcm = 1j * (-w * lm[i] / cm[i] + 1.0 / (w * cm[i] ** 2))
        grads[:, 3 + 3 * i] = dy_dg * (-yb_sq) * rm[i]
        grads[:, 4 + 3 * i] = dy_dg * (-yb_sq * dzb_dfs) * fs[i]
        grads[:, 5 + 3 * i] = dy_dg * (-yb_sq * dzb_dcm) * cm[i]
    return y, grads


def _log_mask(trace: ComplexTrace, weighting: str) -> np.ndarray:
    mask = np.ones(trace.npoints, dtype=bool)
    if weighting == "log_mag_phase":
        mask = np.abs(trace.values) > 0
        dropped = int(np.count_nonzero(~mask))
        if dropped:
            warnings.warn(
                f"log_mag_phase weighting dropped {dropped} zero-magnitude points",
                stacklevel=3,
            )
    return mask


def _residual_from_y(
    y: np.ndarray, ym: np.ndarray, weighting: str, norm: float
) -> np.ndarray:
    r = np.empty(2 * y.size)
    if weighting == "complex":
        d = (y - ym) / norm
        r[0::2] = d.real
        r[1::2] = d.imag
    else:
        r[0::2] = np.log(np.abs(y)) - np.log(np.abs(ym))
        r[1::2] = np.angle(y * np.conj(ym))
    return r


def _jacobian_from_grads(
    y: np.ndarray, grads: np.ndarray, weighting: str, norm: float
) -> np.ndarray:
    jac = np.empty((2 * y.size, grads.shape[1]))
    if weighting == "complex":
        jac[0::2, :] = grads.real / norm
        jac[1::2, :] = grads.imag / norm
    else:
        rel = grads / y[:, None]
        jac[0::2, :] = rel.real
        jac[1::2, :] = rel.imag
    return jac


def residuals(model: MbvdModel, trace: ComplexTrace, weighting: str = "complex") -> np.ndarray:
    """Residual vector between the model and a measured trace.

    "complex" interleaves [Re, Im] of (Y_model - Y_meas) normalized by the
    median measured magnitude; "log_mag_phase" interleaves [ln|Y| error,
    wrapped phase error] and drops zero-magnitude measured points.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    mask = _log_mask(trace, weighting)
    freqs = trace.freqs[mask]
    ym = trace.values[mask]
    norm = _complex_norm(ym) if weighting == "complex" else 1.0
    rm = np.array([b.rm for b in model.branches])
    fs = np.array([b.fs for b in model.branches])
    cm = np.array([b.cm for b in model.branches])
    y, _ = _y_and_grads(freqs, model.c0, model.r0, model.rs, rm, fs, cm, False)
    return _residual_from_y(y, ym, weighting, norm)


def jacobian(
    model: MbvdModel,
    trace: ComplexTrace,
    weighting: str = "complex",
    frozen: Sequence[int] = (),
) -> np.ndarray:
    """Analytic d(residual)/d(ln parameter) matrix.

    Columns follow param_names(); columns listed in frozen are zeroed.
    Matches 7-point central finite differences to better than 1e-5
    relative.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {weighting!r}")
    mask = _log_mask(trace, weighting)
    freqs = trace.freqs[mask]
    ym = trace.values[mask]
    norm = _complex_norm(ym) if weighting == "complex" else 1.0
    rm = np.array([b.rm for b in model.branches])
    fs = np.array([b.fs for b in model.branches])
    cm = np.array([b.cm for b in model.branches])
    y, grads = _y_and_grads(freqs, model.c0, model.r0, model.rs, rm, fs, cm, True)
    jac = _jacobian_from_grads(y, grads, weighting, norm)
    for idx in frozen:
        jac[:, idx] = 0.0
    return jac


def _complex_norm(ym: np.ndarray) -> float:
    norm = float(np.median(np.abs(ym))) if ym.size else 1.0
    return norm if norm > 0 else 1.0


def fit(trace: ComplexTrace, seed: MbvdModel, options: FitOptions | None = None) -> FitResult:
    """Levenberg-Marquardt refinement of seed against trace.

    Multiplicative damping: x10 on a rejected step, /3 on an accepted
    one.  Terminates when the relative cost decrease drops below ftol,
    the relative step below xtol, or max_iter is reached.  The accepted
    cost sequence is non-increasing by construction.
    """
    opts = options or FitOptions()
    if not seed.branches:
        raise ValueError("seed model needs at least one motional branch")
    dom_fs = seed.branches[seed.dominant_index].fs
    if trace.npoints < 2 or not (trace.freqs[0] <= dom_fs <= trace.freqs[-1]):
        raise ValueError("trace does not span the seed's dominant resonance")

    nb = len(seed.branches)
    nparams = 3 + 3 * nb
    if 2 * trace.npoints < nparams:
        raise ValueError(f"{trace.npoints} points cannot constrain {nparams} parameters")

    bounds = opts.bounds if opts.bounds is not None else default_bounds(seed)
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (nparams, 2):
        raise ValueError(f"bounds must have shape ({nparams}, 2), got {bounds.shape}")
    if np.any(bounds <= 0):
        raise ValueError("bounds must be positive (parameters live in log space)")
    if np.any(bounds[:, 0] > bounds[:, 1]):
        raise ValueError("bounds must satisfy lo <= hi")
    lo = np.log(bounds[:, 0])
    hi = np.log(bounds[:, 1])
    free = lo < hi

    mask = _log_mask(trace, opts.weighting)
    freqs = trace.freqs[mask]
    ym = trace.values[mask]
    norm = _complex_norm(ym) if opts.weighting == "complex" else 1.0

    def eval_resid(theta: np.ndarray) -> np.ndarray:
        y, _ = _y_and_grads(freqs, *_unpack(theta), want_grads=False)
        return _residual_from_y(y, ym, opts.weighting, norm)

    def eval_jac(theta: np.ndarray) -> np.ndarray:
        y, grads = _y_and_grads(freqs, *_unpack(theta), want_grads=True)
        return _jacobian_from_grads(y, grads, opts.weighting, norm)

    theta = np.clip(_pack(seed), lo, hi)
    r = eval_resid(theta)
    cost = float(r @ r)
    if not math.isfinite(cost):
        raise FitError("cost is non-finite at the seed")

    cost_trace = [cost]
    lam = opts.lambda0
    iterations = 0
    converged = cost < 1e-300

    while not converged and iterations < opts.max_iter:
        iterations += 1
        jac = eval_jac(theta)[:, free]
        g = jac.T @ r
        h = jac.T @ jac
        d = np.diag(h).copy()
        d = np.maximum(d, 1e-14 * max(float(d.max(initial=0.0)), 1e-300))

        accepted = False
        while lam <= _LAMBDA_MAX:
            a = h + lam * np.diag(d)
            try:
                step = np.linalg.solve(a, -g)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(a, -g, rcond=None)
            theta_new = theta.copy()
            theta_new[free] += step
            np.clip(theta_new, lo, hi, out=theta_new)
            r_new = eval_resid(theta_new)
            cost_new = float(r_new @ r_new)
            if not math.isfinite(cost_new):
                raise FitError("cost became non-finite", iteration=iterations)
            if cost_new <= cost:
                accepted = True
                lam = max(lam / 3.0, _LAMBDA_MIN)
                break
            lam *= 10.0
        if not accepted:
            break

        rel_dec = (cost - cost_new) / max(cost, 1e-300)
        step_rel = float(np.linalg.norm(theta_new - theta)) / max(
            float(np.linalg.norm(theta)), 1e-300
        )
        theta, r, cost = theta_new, r_new, cost_new
        cost_trace.append(cost)
        if cost < 1e-300 or rel_dec < opts.ftol or step_rel < opts.xtol:
            converged = True

    model_out = _model_from_theta(theta)
    jac_final = eval_jac(theta)[:, free]
    m = r.size
    nfree = int(np.count_nonzero(free))
    sigma_sq = cost / max(m - nfree, 1)
    cov_free = np.linalg.pinv(jac_final.T @ jac_final) * sigma_sq
    cov = np.zeros((nparams, nparams))
    free_idx = np.nonzero(free)[0]
    cov[np.ix_(free_idx, free_idx)] = cov_free

    return FitResult(
        model=model_out,
        cost=cost,
        iterations=iterations,
        converged=converged,
        covariance=cov,
        residual_rms=math.sqrt(cost / m) if m else 0.0,
        cost_trace=tuple(cost_trace),
    )


def fit_multistart(
    trace: ComplexTrace,
    seed: MbvdModel,
    options: FitOptions | None = None,
    restarts: int = 0,
) -> FitResult:
    """fit() plus deterministic perturbed restarts; returns the lowest cost.

    Restart i perturbs every free log parameter with N(0, 0.05) drawn
    from a fixed seed, so repeated runs are identical.  The search box
    stays anchored to the original seed.
    """
    opts = options or FitOptions()
    if opts.bounds is None:
        opts = FitOptions(
            max_iter=opts.max_iter,
            ftol=opts.ftol,
            xtol=opts.xtol,
            weighting=opts.weighting,
            lambda0=opts.lambda0,
            bounds=default_bounds(seed),
        )
    best = fit(trace, seed, opts)
    theta0 = _pack(seed)
    lo = np.log(opts.bounds[:, 0])
    hi = np.log(opts.bounds[:, 1])
    free = lo < hi
    for i in range(1, restarts + 1):
        rng = np.random.default_rng(1000 + i)
        theta = theta0.copy()
        theta[free] += rng.normal(0.0, 0.05, int(np.count_nonzero(free)))
        np.clip(theta, lo, hi, out=theta)
        try:
            candidate = fit(trace, _model_from_theta(theta), opts)
        except (FitError, ValueError):
            continue
        if candidate.cost < best.cost:
            best = candidate
    return best


def select_branch_count(
    trace: ComplexTrace,
    candidates: Sequence[ResonanceCandidate],
    options: FitOptions | None = None,
) -> FitResult:
    """Parsimonious branch-count selection.

    Candidates are ranked by prominence; models with k = 1, 2, ... of the
    strongest candidates are fitted until adding a branch improves the
    residual rms by less than 10%, and the last materially better fit is
    returned.
    """
    if not candidates:
        raise ValueError("need at least one resonance candidate")
    if options is not None and options.bounds is not None:
        raise ValueError("explicit bounds fix the parameter count; incompatible with branch-count selection")
    ranked = sorted(candidates, key=lambda c: (-c.prominence_db, c.fs_est))
    all_spans = [c.span for c in candidates]
    best: FitResult | None = None
    for k in range(1, len(ranked) + 1):
        subset = sorted(ranked[:k], key=lambda c: c.fs_est)
        seed = initial_guess(trace, subset, exclude=all_spans)
        result = fit(trace, seed, options)
        if best is not None and result.residual_rms > 0.9 * best.residual_rms:
            return best
        best = result
    return best
