"""Cross-domain iterative OTFS receiver.

The time-domain stage is a sliding 2M-sample LMMSE filter per block with
soft interference cancellation; the DD-domain stage is a symbol-wise
Gaussian-likelihood demapper.  Extrinsic Gaussian messages (diagonal
covariance) are exchanged between the two through the OTFS transform.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .channel import BlockChannel
from .modem import Constellation
from .transforms import (FrameGeometry, dd_to_time, time_to_dd,
                         variance_dd_to_time)

VAR_FLOOR = 1e-10
VAR_CEIL = 1.0


class NumericalError(ArithmeticError):
    """A filter matrix could not be factorized, even after diagonal loading."""

    def __init__(self, msg, block=None, iteration=None):
        super().__init__(msg)
        self.block = block
        self.iteration = iteration


class SearchSpaceError(ValueError):
    """Exhaustive search requested over too many hypotheses."""


@dataclass(frozen=True, eq=False)
class GaussianMessage:
    """Independent complex Gaussians: per-entry mean and variance."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def uninformative(cls, n: int, var: float = 1.0) -> "GaussianMessage":
        return cls(np.zeros(n, dtype=complex), np.full(n, float(var)))

    def clamped(self, floor=VAR_FLOOR, ceil=VAR_CEIL) -> "GaussianMessage":
        return GaussianMessage(self.mean, np.clip(self.var, floor, ceil))


@dataclass
class DetectorConfig:
    max_iters: int = 5
    var_floor: float = VAR_FLOOR
    var_ceil: float = VAR_CEIL
    stop_tol: float = 0.0
    damping: float = 0.0
    # "copy": DD prior variance is the time-domain extrinsic variance entry by
    # entry; "average": lane-averaged through the transform.
    dd_prior_var: str = "copy"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must lie in [0, 1]")
        if not 0.0 < self.var_floor < self.var_ceil:
            raise ValueError("need 0 < var_floor < var_ceil")
        if self.dd_prior_var not in ("copy", "average"):
            raise ValueError("dd_prior_var must be 'copy' or 'average'")


@dataclass
class DetectionResult:
    hard_symbols: np.ndarray
    hard_bits: np.ndarray
    mse_per_iter: list = field(default_factory=list)
    iters_run: int = 0
    time_posteriors: list = field(default_factory=list)


def _hpd_solve(S, rhs, block=None):
    try:
        return sla.cho_solve(sla.cho_factor(S, lower=True, check_finite=False), rhs,
                             check_finite=False)
    except np.linalg.LinAlgError:
        pass
    n = S.shape[0]
    jitter = 1e-12 * np.real(np.trace(S)) / n
    try:
        cf = sla.cho_factor(S + jitter * np.eye(n), lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"filter matrix not positive definite (block {block})",
                             block=block) from exc
    return sla.cho_solve(cf, rhs, check_finite=False)


def block_lmmse(blocks: BlockChannel, r, prior: GaussianMessage, N0: float,
                floor: float = VAR_FLOOR, ceil: float = VAR_CEIL) -> GaussianMessage:
    """Reduced-size LMMSE with soft interference cancellation.

    Block ``s_i`` is estimated from ``[r_i; r_{i+1}]`` after subtracting the
    prior-mean contribution of ``s_{i-1}`` and ``s_{i+1}``; their prior
    variances enter the filter as coloured noise.  All blocks use the same
    prior (parallel schedule).  Only the diagonal of the posterior covariance
    is returned.
    """
    if N0 <= 0:
        raise ValueError("N0 must be positive")
    M, N = blocks.M, blocks.N
    R = np.asarray(r).reshape(N, M)
    mu = np.asarray(prior.mean).reshape(N, M)
    v = np.asarray(prior.var, dtype=float).reshape(N, M)
    A, B = blocks.A, blocks.B

    post_mean = np.empty((N, M), dtype=complex)
    post_var = np.empty((N, M))
    eye = N0 * np.eye(2 * M)
    if N == 1:
        # r_0 = (H^{0,0} + H^{0,1}) s_0 + n: no other block to cancel
        H = blocks.diag[0] + blocks.sub[0]
        return full_lmmse_baseline(H, R[0], prior, N0, floor, ceil)
    for i in range(N):
        nxt, prv = (i + 1) % N, (i - 1) % N
        Ai, Bi, c = A[i], B[i], v[i]
        if prv == nxt:
            # N = 2: both interferer slots hold the same block, so merge them
            Bi = Bi[:, :M] + Bi[:, M:]
            c_int, m_int = v[nxt], mu[nxt]
        else:
            c_int = np.concatenate([v[prv], v[nxt]])
            m_int = np.concatenate([mu[prv], mu[nxt]])
        S = (Ai * c) @ Ai.conj().T + (Bi * c_int) @ Bi.conj().T + eye
        resid = np.concatenate([R[i], R[nxt]]) - Bi @ m_int - Ai @ mu[i]
        X = _hpd_solve(S, np.column_stack([Ai, resid]), block=i)
        post_mean[i] = mu[i] + c * (Ai.conj().T @ X[:, M])
        post_var[i] = c - c * c * np.real(np.sum(Ai.conj() * X[:, :M], axis=0))
    return GaussianMessage(post_mean.reshape(-1), np.clip(post_var.reshape(-1), floor, ceil))


def full_lmmse_baseline(H, r, prior: GaussianMessage, N0: float,
                        floor: float = VAR_FLOOR, ceil: float = VAR_CEIL) -> GaussianMessage:
    """Frame-wide LMMSE with soft interference cancellation (dense ``MN x MN`` solve)."""
    if N0 <= 0:
        raise ValueError("N0 must be positive")
    H = np.asarray(H)
    c = np.asarray(prior.var, dtype=float)
    mu = np.asarray(prior.mean)
    S = (H * c) @ H.conj().T + N0 * np.eye(H.shape[0])
    resid = np.asarray(r) - H @ mu
    X = _hpd_solve(S, np.column_stack([H, resid]))
    n = H.shape[1]
    mean = mu + c * (H.conj().T @ X[:, n])
    var = c - c * c * np.real(np.sum(H.conj() * X[:, :n], axis=0))
    return GaussianMessage(mean, np.clip(var, floor, ceil))


def extrinsic(post: GaussianMessage, prior: GaussianMessage,
              floor: float = VAR_FLOOR, ceil: float = VAR_CEIL) -> GaussianMessage:
    """Divide the posterior by the prior, entry by entry.

    Entries where the posterior is not sharper than the prior, or only so
    slightly sharper that the extrinsic variance would exceed ``ceil``, carry
    no usable information and come back as ``(m_post, ceil)``.  Dividing in
    that regime amplifies the mean by ``v_e`` and lets it run away.
    """
    vp = np.asarray(post.var, dtype=float)
    va = np.asarray(prior.var, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ve = 1.0 / (1.0 / vp - 1.0 / va)
    gained = (vp < va) & np.isfinite(ve) & (ve <= ceil)
    ve = np.where(gained, ve, ceil)
    vp_s = np.where(gained, vp, 1.0)
    va_s = np.where(gained, va, 1.0)
    me = np.where(gained, ve * (post.mean / vp_s - prior.mean / va_s), post.mean)
    return GaussianMessage(me, np.clip(ve, floor, ceil))


def dd_demap(prior: GaussianMessage, const: Constellation,
             floor: float = VAR_FLOOR) -> tuple[GaussianMessage, np.ndarray]:
    """Symbol-wise posterior under ``m = x + CN(0, v)`` with uniform symbol prior.

    Returns the posterior message and the index of the most likely
    constellation point for every symbol.
    """
    m = np.asarray(prior.mean)[:, None]
    v = np.asarray(prior.var, dtype=float)[:, None]
    pts = const.points[None, :]
    d2 = np.abs(m - pts) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        logits = -d2 / v
    ok = np.all(np.isfinite(logits), axis=1)
    logits = np.where(ok[:, None], logits, 0.0)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    mean = (w * pts).sum(axis=1)
    var = (w * np.abs(pts) ** 2).sum(axis=1) - np.abs(mean) ** 2
    hard = np.argmax(w, axis=1)
    if not ok.all():
        nearest = np.argmin(d2, axis=1)
        hard = np.where(ok, hard, nearest)
        mean = np.where(ok, mean, const.points[nearest])
        var = np.where(ok, var, floor)
    return GaussianMessage(mean, np.maximum(var, floor)), hard


TimeEstimator = Callable[[np.ndarray, GaussianMessage, float], GaussianMessage]


def detect_cross_domain(blocks: BlockChannel, r, N0: float, const: Constellation,
                        cfg: Optional[DetectorConfig] = None,
                        estimator: Optional[TimeEstimator] = None,
                        demapper=None) -> DetectionResult:
    """Iterate time-domain LMMSE and DD-domain demapping with extrinsic exchange.

    ``estimator(r, prior, N0)`` replaces the block LMMSE (e.g. with the
    full-size baseline); ``demapper(prior)`` replaces the DD symbol demapper
    and must return ``(posterior, hard_indices)``.
    """
    cfg = cfg or DetectorConfig()
    geom: FrameGeometry = blocks.geom
    lo, hi = cfg.var_floor, cfg.var_ceil
    if estimator is None:
        def estimator(r_, prior_, n0_):
            return block_lmmse(blocks, r_, prior_, n0_, lo, hi)
    if demapper is None:
        def demapper(prior_):
            return dd_demap(prior_, const, lo)

    prior_t = GaussianMessage.uninformative(geom.size, 1.0)
    result = DetectionResult(hard_symbols=None, hard_bits=None)
    hard = None
    prev_mse = None
    for it in range(cfg.max_iters):
        try:
            post_t = estimator(r, prior_t, N0)
        except NumericalError as exc:
            exc.iteration = it
            raise
        ext_t = extrinsic(post_t, prior_t, lo, hi)

        dd_var = ext_t.var if cfg.dd_prior_var == "copy" else variance_dd_to_time(ext_t.var, geom)
        prior_dd = GaussianMessage(time_to_dd(ext_t.mean, geom), dd_var.copy())
        post_dd, hard = demapper(prior_dd)

        post_s = GaussianMessage(dd_to_time(post_dd.mean, geom),
                                 variance_dd_to_time(post_dd.var, geom))
        ext_dd = extrinsic(post_s, ext_t, lo, hi)
        if cfg.damping > 0:
            d = cfg.damping
            ext_dd = GaussianMessage((1 - d) * ext_dd.mean + d * prior_t.mean,
                                     (1 - d) * ext_dd.var + d * prior_t.var)
        prior_t = ext_dd

        mse = float(np.mean(post_t.var))
        result.mse_per_iter.append(mse)
        result.time_posteriors.append(post_t)
        result.iters_run = it + 1
        if cfg.stop_tol > 0 and prev_mse is not None and abs(prev_mse - mse) < cfg.stop_tol:
            break
        prev_mse = mse

    result.hard_symbols = const.points[hard]
    result.hard_bits = const.bit_table()[hard].reshape(-1)
    return result


def brute_force_map(H, obs, const: Constellation, N0: Optional[float] = None,
                    geom: Optional[FrameGeometry] = None, domain: str = "time",
                    max_hypotheses: int = 2 ** 20, chunk: int = 4096) -> np.ndarray:
    """Exhaustive ML sequence detection over all DD symbol vectors.

    With ``domain="time"`` the metric is ``||r - H_T s(x)||^2`` with
    ``s(x) = dd_to_time(x)`` (``geom`` required); with ``domain="dd"`` it is
    ``||y - H_DD x||^2``.  ``N0`` does not change the ML decision and is
    accepted only for interface symmetry.
    """
    H = np.asarray(H)
    obs = np.asarray(obs)
    n = H.shape[1]
    q = const.size
    if q ** n > max_hypotheses:
        raise SearchSpaceError(f"{q}^{n} hypotheses exceeds limit {max_hypotheses}")
    if domain == "time":
        if geom is None:
            geom = FrameGeometry(n, 1)
        if geom.size != n:
            raise ValueError("geometry does not match channel size")
    elif domain != "dd":
        raise ValueError("domain must be 'time' or 'dd'")

    best_metric, best_idx = np.inf, None
    combos = itertools.product(range(q), repeat=n)
    while True:
        idx = np.array(list(itertools.islice(combos, chunk)))
        if idx.size == 0:
            break
        X = const.points[idx]
        if domain == "time":
            X = np.fft.ifft(X.reshape(-1, geom.N, geom.M), axis=1, norm="ortho").reshape(len(idx), n)
        metric = np.sum(np.abs(obs[None, :] - X @ H.T) ** 2, axis=1)
        j = int(np.argmin(metric))
        if metric[j] < best_metric:
            best_metric, best_idx = metric[j], idx[j]
    return const.points[best_idx]
