"""Coincidence-histogram analysis for pulsed g2 and two-photon interference.

A histogram is modelled as a train of two-sided exponential peaks on a flat
dark-count baseline,

    m(t) = B + sum_i A_i exp(-|t - i P - t0| / tau),

averaged over each bin, with the peak centers locked to the laser period
``P`` and one global offset ``t0``.  Bin averaging keeps the likelihood
smooth in ``t0`` and makes ``2 A_i tau`` the exact peak area.  The fit
maximizes the Poisson likelihood by iteratively reweighted least squares;
the peak areas then give g2(0) and, with the
beamsplitter and interferometer-visibility correction, the indistinguishability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REP_PERIOD = 12.195  # ns, 82 MHz
HOM_DELAY = 12.2  # ns
DEFAULT_WINDOW = (-15.0, 615.0)


class DegenerateHistogramError(ValueError):
    """The histogram carries no counts (or too few peaks) to fit."""


class FitConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.6g})")
        self.residual = residual


class InsufficientPeaksError(ValueError):
    pass


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Binned coincidences versus delay.

    Parameters
    ----------
    bin_centers : array
        Delays in ns, uniformly spaced.
    counts : array
        Non-negative counts per bin.  Measured data are integers; noiseless
        expected counts (for tests and forward models) are accepted as is.
    rep_period, hom_delay : float
        Laser period and interferometer delay, ns.
    """

    bin_centers: np.ndarray
    counts: np.ndarray
    rep_period: float = REP_PERIOD
    hom_delay: float = HOM_DELAY

    def __post_init__(self):
        t = np.asarray(self.bin_centers, dtype=float)
        c = np.asarray(self.counts)
        if t.ndim != 1 or t.shape != c.shape or t.size < 2:
            raise ValueError("bin_centers and counts must be 1-D arrays of equal length >= 2")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ValueError("counts must be finite and non-negative")
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
            raise ValueError("bin spacing must be uniform to 1e-6 relative")
        object.__setattr__(self, "bin_centers", t)
        object.__setattr__(self, "counts", c.astype(float))

    @property
    def bin_width(self) -> float:
        return float(self.bin_centers[1] - self.bin_centers[0])

    def window(self, t_min: float, t_max: float) -> "CoincidenceHistogram":
        keep = (self.bin_centers >= t_min) & (self.bin_centers <= t_max)
        return CoincidenceHistogram(self.bin_centers[keep], self.counts[keep],
                                    self.rep_period, self.hom_delay)


def load_histogram(path, rep_period: float = REP_PERIOD, hom_delay: float = HOM_DELAY,
                   ) -> CoincidenceHistogram:
    """Read a two-column (delay_ns, counts) text file; ``#`` starts a comment.

    Columns may be separated by commas, tabs or spaces.
    """
    text = Path(path).read_text()
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.replace(",", " ").split()
        if len(fields) < 2:
            raise ValueError(f"{path}: expected two columns, got {line!r}")
        rows.append((float(fields[0]), float(fields[1])))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    return CoincidenceHistogram(data[:, 0], data[:, 1], rep_period, hom_delay)


def _fmt_count(c: float) -> str:
    return str(int(c)) if c == int(c) else repr(c)


def save_histogram(h: CoincidenceHistogram, path, header: str = "") -> None:
    lines = [f"# {ln}" for ln in header.splitlines()]
    lines.append("# delay_ns,counts")
    lines += [f"{t!r},{_fmt_count(c)}" for t, c in zip(h.bin_centers.tolist(), h.counts.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PeakTrainFit:
    """Fitted peak train.

    ``params`` is ``[B, tau, t0, A_...]``; ``fisher`` is the Poisson Fisher
    information at the optimum and ``covariance`` its pseudo-inverse.  ``peak_index[j]`` is the period index of ``A[j]``.
    """

    baseline: float
    tau: float
    offset: float
    amplitudes: np.ndarray
    peak_index: np.ndarray
    rep_period: float
    hom_delay: float
    bin_width: float
    covariance: np.ndarray
    fisher: np.ndarray
    reduced_chi2: float
    iterations: int
    gradient_norm: float

    @property
    def centers(self) -> np.ndarray:
        return self.peak_index * self.rep_period + self.offset

    @property
    def areas(self) -> np.ndarray:
        """Peak areas in counts*ns / bin_width, i.e. total counts per peak."""
        return 2 * self.amplitudes * self.tau / self.bin_width

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([[self.baseline, self.tau, self.offset], self.amplitudes])

    def model(self, t) -> np.ndarray:
        """Expected counts in bins of the fitted width centred at ``t``."""
        return _model(self.params, np.asarray(t, dtype=float), self.peak_index, self.rep_period,
                      self.bin_width)

    def amplitude(self, i: int) -> float:
        return float(self.amplitudes[self._slot(i)])

    def _slot(self, i: int) -> int:
        hit = np.flatnonzero(self.peak_index == i)
        if hit.size == 0:
            raise InsufficientPeaksError(f"peak {i} is not in the fit window")
        return int(hit[0])


_REACH = 2  # neighbouring periods evaluated on each side of a bin


def _prim(x, tau):
    # integral of exp(-|u|/tau) from 0 to x, and its tau-derivative
    ex = np.exp(-np.abs(x) / tau)
    sgn = np.sign(x)
    return sgn * tau * (1.0 - ex), sgn * (1.0 - ex * (1.0 + np.abs(x) / tau))


def _terms(p, t, idx, period, bw, derivs=True):
    """Bin-averaged peak shapes for the peaks within ``_REACH`` periods of each bin.

    Returns the peak columns and, per (bin, peak) pair, the shape, its
    derivative with respect to tau, and with respect to the peak center.
    Peaks further away contribute below exp(-2.25 P / tau), negligible for the
    allowed ``tau <= P / 10``.
    """
    tau = p[1]
    near = np.rint(t / period).astype(int)[:, None] + np.arange(-_REACH, _REACH + 1)[None, :]
    cols = near - idx[0]
    valid = (cols >= 0) & (cols < idx.size)
    cols = np.clip(cols, 0, idx.size - 1)
    d = t[:, None] - (idx[cols] * period + p[2])
    fa, ga = _prim(d - 0.5 * bw, tau)
    fb, gb = _prim(d + 0.5 * bw, tau)
    shape = np.where(valid, (fb - fa) / bw, 0.0)
    if not derivs:
        return cols, shape, None, None
    d_tau = np.where(valid, (gb - ga) / bw, 0.0)
    d_center = np.where(valid, (np.exp(-np.abs(d - 0.5 * bw) / tau)
                                - np.exp(-np.abs(d + 0.5 * bw) / tau)) / bw, 0.0)
    return cols, shape, d_tau, d_center


def _model(p, t, idx, period, bw):
    cols, shape, _, _ = _terms(p, t, idx, period, bw, derivs=False)
    return p[0] + np.sum(shape * p[3:][cols], axis=1)


def _jacobian(p, t, idx, period, bw):
    cols, shape, d_tau, d_center = _terms(p, t, idx, period, bw)
    amp = p[3:][cols]
    jac = np.zeros((t.size, p.size))
    jac[:, 0] = 1.0
    jac[:, 1] = np.sum(amp * d_tau, axis=1)
    jac[:, 2] = np.sum(amp * d_center, axis=1)
    rows = np.arange(t.size)
    for k in range(cols.shape[1]):
        jac[rows, 3 + cols[:, k]] += shape[:, k]
    return jac


def _initial_guess(t, y, idx, period, bw):
    # baseline from the inter-peak gaps, then per-peak projections for each trial tau
    phase = np.abs(t / period - np.rint(t / period))
    gap = phase > 0.3
    b = float(np.mean(y[gap])) if gap.any() else float(np.min(y))
    best = None
    for tau in np.geomspace(period / 2000, period / 10, 16):
        p = np.concatenate([[b, tau, 0.0], np.zeros(idx.size)])
        cols, e, _, _ = _terms(p, t, idx, period, bw, derivs=False)
        num = np.bincount(cols.ravel(), (e * (y - b)[:, None]).ravel(), minlength=idx.size)
        den = np.bincount(cols.ravel(), (e * e).ravel(), minlength=idx.size)
        p[3:] = np.maximum(num / np.where(den > 0, den, 1.0), 0.0)
        r = float(np.sum((_model(p, t, idx, period, bw) - y) ** 2))
        if best is None or r < best[0]:
            best = (r, p)
    return best[1]


_FLOOR = 1e-3  # lower bound on the Poisson variance used as a weight
_EPS = np.finfo(float).eps


def _loglik(y, m):
    return float(np.sum(y * np.log(m) - m))


def fit_peak_train(h: CoincidenceHistogram, window=DEFAULT_WINDOW, *, max_iter: int = 100,
                   gtol: float = 1e-6) -> PeakTrainFit:
    """Poisson maximum-likelihood fit of the peak train inside ``window``.

    Bound-constrained Fisher scoring: each step is the Poisson-weighted
    (``1 / m``) Gauss-Newton step of the least-squares problem, restricted to
    parameters not pinned at a bound and backtracked until the likelihood
    increases.  Convergence requires the free components of the score,
    in units of their Fisher standard deviation, to fall below ``gtol``, or
    the predicted likelihood gain of the next step to drop below the
    floating-point resolution of the log-likelihood.

    Raises
    ------
    DegenerateHistogramError
        Empty window, all-zero counts, or fewer than ten periods covered.
    FitConvergenceError
        The score does not become stationary within ``max_iter`` steps.
    """
    t_min, t_max = window
    w = h.window(t_min, t_max)
    if w.bin_centers.size == 0 or w.counts.sum() == 0:
        raise DegenerateHistogramError("no counts in the fit window")
    period = h.rep_period
    if (t_max - t_min) < 10 * period:
        raise DegenerateHistogramError("fit window must cover at least ten repetition periods")
    t, y = w.bin_centers, w.counts.astype(float)
    idx = np.arange(math.ceil(t_min / period), math.floor(t_max / period) + 1)
    lo = np.concatenate([[0.0, 1e-3 * w.bin_width, -period / 4], np.zeros(idx.size)])
    hi = np.concatenate([[np.inf, period / 10, period / 4], np.full(idx.size, np.inf)])
    bw = w.bin_width
    p = np.clip(_initial_guess(t, y, idx, period, bw), lo, hi)

    def mean(q):
        return np.maximum(_model(q, t, idx, period, bw), _FLOOR)

    m = mean(p)
    ll = _loglik(y, m)
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        J = _jacobian(p, t, idx, period, bw)
        score = J.T @ ((y - m) / m)
        fisher = J.T @ (J / m[:, None])
        sd = np.sqrt(np.diag(fisher))
        pinned = ((p <= lo) & (score <= 0)) | ((p >= hi) & (score >= 0))
        free = ~pinned & (sd > 0)
        gnorm = float(np.max(np.abs(score[free] / sd[free]), initial=0.0))
        if gnorm < gtol:
            break
        step = np.zeros_like(p)
        step[free] = np.linalg.lstsq(fisher[np.ix_(free, free)], score[free], rcond=None)[0]
        if 0.5 * score[free] @ step[free] <= _EPS * abs(ll):
            break  # remaining gain is below the resolution of the log-likelihood
        alpha = 1.0
        for _ in range(40):
            trial = np.clip(p + alpha * step, lo, hi)
            m_trial = mean(trial)
            ll_trial = _loglik(y, m_trial)
            if ll_trial >= ll:
                break
            alpha *= 0.5
        else:
            raise FitConvergenceError("line search failed", -ll)
        p, m, ll = trial, m_trial, ll_trial
    else:
        raise FitConvergenceError(f"score not stationary after {max_iter} steps "
                                  f"(norm {gnorm:.3g})", -ll)

    J = _jacobian(p, t, idx, period, bw)
    fisher = J.T @ (J / m[:, None])
    cov = np.linalg.pinv(fisher)
    chi2 = float(np.sum((y - m) ** 2 / m)) / max(y.size - p.size, 1)
    return PeakTrainFit(
        baseline=float(p[0]), tau=float(p[1]), offset=float(p[2]), amplitudes=p[3:].copy(),
        peak_index=idx, rep_period=period, hom_delay=h.hom_delay, bin_width=w.bin_width,
        covariance=cov, fisher=fisher, reduced_chi2=chi2, iterations=it, gradient_norm=gnorm,
    )


@dataclass(frozen=True)
class PeakRatio:
    """Zero-delay to uncorrelated peak-area ratio with its 1-sigma error."""

    value: float
    error: float
    statistical_error: float
    baseline_error: float
    n_uncorrelated: int


def _side_peaks(fit: PeakTrainFit, n: int, exclude: tuple[int, ...]) -> np.ndarray:
    cand = [i for i in fit.peak_index.tolist() if i != 0 and i not in exclude]
    cand.sort(key=lambda i: (abs(i), i))
    if len(cand) < n:
        raise InsufficientPeaksError(f"need {n} uncorrelated peaks, the window holds {len(cand)}")
    return np.array([fit._slot(i) for i in cand[:n]])


def peak_ratio(fit: PeakTrainFit, n_uncorrelated: int, exclude: tuple[int, ...] = ()) -> PeakRatio:
    """``A_0 / <A_i>`` over the ``n_uncorrelated`` nearest allowed side peaks.

    The error adds in quadrature the fit covariance and the dark-count term:
    the change of the ratio when the baseline is held one per-bin Poisson
    width ``sqrt(B)`` away from its fitted value and the remaining parameters
    follow (linear response through the Fisher matrix).
    """
    side = _side_peaks(fit, n_uncorrelated, exclude)
    zero = fit._slot(0)
    a = fit.amplitudes
    mean = a[side].mean()
    if mean <= 0:
        raise DegenerateHistogramError("uncorrelated peaks have zero area")
    r = a[zero] / mean
    grad = np.zeros(fit.params.size)
    grad[3 + zero] = 1.0 / mean
    grad[3 + side] = -r / (mean * side.size)
    stat = float(np.sqrt(max(grad @ fit.covariance @ grad, 0.0)))
    # refit response of the other parameters to a baseline held sqrt(B) off
    f = fit.fisher
    shift = np.zeros(fit.params.size)
    shift[0] = 1.0
    shift[1:] = -np.linalg.lstsq(f[1:, 1:], f[1:, 0], rcond=None)[0]
    base = float(abs(grad @ shift) * np.sqrt(fit.baseline))
    return PeakRatio(float(r), float(math.hypot(stat, base)), stat, base, int(side.size))


def extract_g2(fit: PeakTrainFit, n_uncorrelated: int = 50) -> PeakRatio:
    """g2(0) from an autocorrelation histogram (all side peaks allowed)."""
    return peak_ratio(fit, n_uncorrelated)


def hom_ratio(fit: PeakTrainFit, n_uncorrelated: int = 49) -> PeakRatio:
    """A_0 / <A> of an interference histogram, skipping the peaks at the interferometer delay."""
    k = int(round(fit.hom_delay / fit.rep_period))
    return peak_ratio(fit, n_uncorrelated, exclude=(-k, k))


@dataclass(frozen=True)
class HOMResult:
    g2_zero: float
    A0_over_mean: float
    I_raw: float
    I_corrected: float
    err_plus: float
    err_minus: float
    sigma: float
    R: float
    T: float
    epsilon: float
    out_of_range: bool = False
    flags: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["flags"] = list(self.flags)
        return d


def corrected_indistinguishability(g2_zero: float, A0_over_mean: float, R: float = 0.5,
                                   T: float = 0.5, epsilon: float = 0.0, *,
                                   g2_error: float = 0.0, ratio_error: float = 0.0) -> HOMResult:
    """Indistinguishability from the interference peak ratio.

        I = [g2 + (R^2 + T^2) / (2RT) - (R + T)^2 / (2RT) * A0/<A>] / (1 - eps)^2

    ``I_raw`` omits the multi-photon ``g2`` term.  Values outside [0, 1] are
    reported unchanged with ``out_of_range`` set.  Errors are first-order
    propagated and cut at the physical range, which makes them asymmetric
    near 0 and 1.
    """
    for name, v in (("g2_zero", g2_zero), ("A0_over_mean", A0_over_mean), ("R", R), ("T", T),
                    ("epsilon", epsilon)):
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite")
    if not (0 < R < 1 and 0 < T < 1):
        raise ValueError("R and T must lie in (0, 1)")
    if abs(R + T - 1) > 1e-6:
        raise ValueError(f"R + T must equal 1 to 1e-6, got {R + T}")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    vis = (1 - epsilon) ** 2
    c0 = (R**2 + T**2) / (2 * R * T)
    c1 = (R + T) ** 2 / (2 * R * T)
    i_raw = (c0 - c1 * A0_over_mean) / vis
    i_cor = (g2_zero + c0 - c1 * A0_over_mean) / vis
    sigma = math.hypot(g2_error, c1 * ratio_error) / vis
    out = not (0.0 <= i_cor <= 1.0)
    flags = ("out_of_range",) if out else ()
    err_plus = max(0.0, min(sigma, 1.0 - i_cor)) if not out else sigma
    err_minus = max(0.0, min(sigma, i_cor)) if not out else sigma
    return HOMResult(g2_zero, A0_over_mean, i_raw, i_cor, err_plus, err_minus, sigma,
                     R, T, epsilon, out, flags)


def expected_hom_ratio(I: float, g2: float, R: float = 0.5, T: float = 0.5,
                       epsilon: float = 0.0) -> float:
    """A0/<A> that the correction formula maps back to ``I``."""
    c0 = (R**2 + T**2) / (2 * R * T)
    c1 = (R + T) ** 2 / (2 * R * T)
    return (g2 + c0 - I * (1 - epsilon) ** 2) / c1


def synthesize_histogram(zero_ratio: float, *, amplitude: float = 1000.0, baseline: float = 2.0,
                         tau: float = 0.25, bin_width: float = 0.1, window=DEFAULT_WINDOW,
                         rep_period: float = REP_PERIOD, hom_delay: float = HOM_DELAY,
                         delay_peak_ratio: float | None = None, rng=None,
                         ) -> CoincidenceHistogram:
    """Peak-train histogram with zero-delay amplitude ``zero_ratio * amplitude``.

    ``delay_peak_ratio`` scales the peaks at ``+-hom_delay`` (0.75 for an
    unbalanced Mach-Zehnder interferometer); with ``rng`` the counts are
    Poisson samples, otherwise the noiseless expectation is returned.
    """
    t_min, t_max = window
    n = int(round((t_max - t_min) / bin_width))
    t = t_min + bin_width * np.arange(n + 1)
    idx = np.arange(math.ceil(t_min / rep_period), math.floor(t_max / rep_period) + 1)
    amps = np.full(idx.size, float(amplitude))
    amps[idx == 0] = zero_ratio * amplitude
    if delay_peak_ratio is not None:
        k = int(round(hom_delay / rep_period))
        amps[np.abs(idx) == k] = delay_peak_ratio * amplitude
    mean = _model(np.concatenate([[baseline, tau, 0.0], amps]), t, idx, rep_period, bin_width)
    counts = mean if rng is None else rng.poisson(mean)
    return CoincidenceHistogram(t, counts, rep_period, hom_delay)


@dataclass(frozen=True)
class HOMAnalysis:
    g2_fit: PeakTrainFit
    hom_fit: PeakTrainFit
    g2: PeakRatio
    hom: PeakRatio
    result: HOMResult

    def report(self) -> dict:
        def fit_dict(f: PeakTrainFit):
            return {"baseline": f.baseline, "tau_ns": f.tau, "offset_ns": f.offset,
                    "peak_index": f.peak_index.tolist(), "amplitudes": f.amplitudes.tolist(),
                    "covariance": f.covariance.tolist(), "reduced_chi2": f.reduced_chi2,
                    "iterations": f.iterations}

        def ratio_dict(r: PeakRatio):
            return {"value": r.value, "error": r.error, "statistical_error": r.statistical_error,
                    "baseline_error": r.baseline_error, "n_uncorrelated": r.n_uncorrelated}

        flags = list(self.result.flags)
        for name, f in (("g2", self.g2_fit), ("hom", self.hom_fit)):
            if f.reduced_chi2 > 2:
                flags.append(f"{name}_misfit")
        return {"g2_fit": fit_dict(self.g2_fit), "hom_fit": fit_dict(self.hom_fit),
                "g2": ratio_dict(self.g2), "A0_over_mean": ratio_dict(self.hom),
                "result": self.result.as_dict(), "flags": flags}


def analyze(g2_hist: CoincidenceHistogram, hom_hist: CoincidenceHistogram, *, R: float = 0.5,
            T: float = 0.5, epsilon: float = 0.0, window=DEFAULT_WINDOW, n_g2: int = 50,
            n_hom: int = 49) -> HOMAnalysis:
    """Fit both histograms and apply the beamsplitter/visibility correction."""
    fg = fit_peak_train(g2_hist, window)
    fh = fit_peak_train(hom_hist, window)
    g2 = extract_g2(fg, n_g2)
    hr = hom_ratio(fh, n_hom)
    res = corrected_indistinguishability(g2.value, hr.value, R, T, epsilon,
                                         g2_error=g2.error, ratio_error=hr.error)
    return HOMAnalysis(fg, fh, g2, hr, res)
