import logging
import warnings
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import nnls
from sklearn.decomposition import non_negative_factorization
from sklearn.exceptions import ConvergenceWarning

from facedyn.core.errors import ArgumentError
from facedyn.core.seeding import rng, sub_seed
from facedyn.schemas.ingest import AU_NAMES, AuRecording
from facedyn.schemas.nmf import (
    NmfModel,
    RankScanEntry,
    RankScanResult,
    ReconstructionReport,
    RepresentativeSet,
)

logger = logging.getLogger(__name__)


def assemble_v(recordings: Sequence[AuRecording]) -> tuple[np.ndarray, list[tuple[str, int]]]:
    """Stack videos side by side: V is AU × (video, frame), columns kept in input order."""
    if not recordings:
        raise ArgumentError("No recordings to assemble")
    blocks = []
    columns = []
    for rec in recordings:
        if np.any(rec.au < 0):
            raise ArgumentError(f"Recording {rec.video_id} has negative intensities; normalize and shift first")
        blocks.append(rec.au.T)
        columns.append((rec.video_id, rec.n_frames))
    return np.hstack(blocks), columns


def _mse(V: np.ndarray, R: np.ndarray) -> float:
    return float(np.mean((V - R) ** 2))


def _pooled_r2(V: np.ndarray, R: np.ndarray) -> float:
    ss_tot = float(np.sum((V - V.mean(axis=1, keepdims=True)) ** 2))
    if ss_tot == 0:
        return float("nan")
    return 1.0 - float(np.sum((V - R) ** 2)) / ss_tot


def _sweep(V: np.ndarray, W: np.ndarray, H: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        W, H, _ = non_negative_factorization(
            V,
            W=W.copy(),
            H=H.copy(),
            n_components=k,
            init="custom",
            solver="cd",
            beta_loss="frobenius",
            max_iter=1,
            tol=0.0,
            alpha_W=0.0,
            alpha_H=0.0,
            shuffle=False,
        )
    return W, H


def _random_init(V: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    gen = rng(seed)
    scale = np.sqrt(V.mean() / k)
    W = gen.uniform(0.0, 1.0, size=(V.shape[0], k)) * scale
    H = gen.uniform(0.0, 1.0, size=(k, V.shape[1])) * scale
    return W, H


def _absorb_scale(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    peak = W.max(axis=0)
    d = np.where(peak > 0, peak, 1.0)
    return W / d, d


def nmf_fit(
    V: np.ndarray,
    k: int,
    max_iter: int = 500,
    tol: float = 1e-5,
    seed: int = 0,
    columns: Optional[list[tuple[str, int]]] = None,
    init: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> NmfModel:
    """
    Alternating non-negative least squares, one coordinate-descent sweep over W then H per
    iteration. Stops on a relative MSE change below `tol` or when successive reconstructions
    correlate above 1 - tol. The best iterate is returned either way.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ArgumentError("V must be a matrix")
    if np.any(V < 0) or not np.all(np.isfinite(V)):
        raise ArgumentError("V must be finite and non-negative")
    if not 1 <= k <= min(V.shape[0], V.shape[1]):
        raise ArgumentError(f"rank {k} out of range 1..{min(V.shape)}")
    columns = columns or []

    if not V.any():
        return NmfModel(
            W=np.zeros((V.shape[0], k)),
            d=np.ones(k),
            H=np.zeros((k, V.shape[1])),
            columns=columns,
            rank=k,
            seed=seed,
            train_mse=0.0,
            train_r2=float("nan"),
            converged=True,
            n_iter=0,
            objective_trace=[0.0],
        )

    W, H = init if init is not None else _random_init(V, k, seed)
    R = W @ H
    trace = [_mse(V, R)]
    best = (trace[0], W, H)
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        W, H = _sweep(V, W, H, k)
        R_next = W @ H
        mse = _mse(V, R_next)
        trace.append(mse)
        if mse <= best[0]:
            best = (mse, W, H)

        rel_change = (trace[-2] - mse) / max(trace[-2], np.finfo(float).tiny)
        if R.std() > 0 and R_next.std() > 0:
            corr = float(np.corrcoef(R.ravel(), R_next.ravel())[0, 1])
        else:
            corr = 0.0
        R = R_next
        if abs(rel_change) < tol or corr > 1.0 - tol:
            converged = True
            break

    mse, W, H = best
    W, d = _absorb_scale(W)
    if not converged:
        logger.warning("NMF rank %d did not converge in %d iterations (mse %.3g)", k, max_iter, mse)
    return NmfModel(
        W=W,
        d=d,
        H=H,
        columns=columns,
        rank=k,
        seed=seed,
        train_mse=mse,
        train_r2=_pooled_r2(V, (W * d) @ H),
        converged=converged,
        n_iter=n_iter,
        objective_trace=trace,
    )


def _grow(V: np.ndarray, model: NmfModel) -> tuple[np.ndarray, np.ndarray]:
    """Previous solution plus one component seeded on the largest positive residual."""
    W = model.W * model.d
    H = model.H
    residual = V - W @ H
    i, j = np.unravel_index(np.argmax(residual), residual.shape)
    w_new = np.zeros((V.shape[0], 1))
    h_new = np.zeros((1, V.shape[1]))
    w_new[i, 0] = 1.0
    h_new[0, j] = max(float(residual[i, j]), 0.0)
    return np.hstack([W, w_new]), np.vstack([H, h_new])


def rank_scan(
    V: np.ndarray,
    ranks: Iterable[int] = range(2, 11),
    restarts: int = 3,
    seed: int = 0,
    max_iter: int = 500,
    tol: float = 1e-5,
) -> RankScanResult:
    ranks = sorted(set(int(k) for k in ranks))
    if not ranks:
        raise ArgumentError("No ranks to scan")
    if restarts < 1:
        raise ArgumentError(f"restarts must be >= 1, got {restarts}")

    entries = []
    previous: Optional[NmfModel] = None
    for k in ranks:
        candidates = [
            nmf_fit(V, k, max_iter=max_iter, tol=tol, seed=sub_seed(seed, k, r)) for r in range(restarts)
        ]
        if previous is not None and previous.rank == k - 1:
            candidates.append(nmf_fit(V, k, max_iter=max_iter, tol=tol, seed=seed, init=_grow(V, previous)))
        best = min(candidates, key=lambda m: m.train_mse)
        entries.append(RankScanEntry(rank=k, mse=best.train_mse))
        logger.info("Rank %d: best mse %.6g over %d candidates", k, best.train_mse, len(candidates))
        previous = best
    return RankScanResult(entries=entries)


def export_rank_scan(result: RankScanResult) -> pd.DataFrame:
    return pd.DataFrame([e.model_dump() for e in result.entries], columns=["rank", "mse"])


def project_h(recording: AuRecording, W: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Per-frame NNLS activations of a held-out recording under fixed W, d."""
    basis = np.asarray(W) * np.asarray(d)
    V = np.clip(recording.au.T, 0.0, None)
    H = np.zeros((basis.shape[1], V.shape[1]))
    for t in range(V.shape[1]):
        if V[:, t].any():
            H[:, t] = nnls(basis, V[:, t])[0]
    return H


def reconstruction_r2(
    recordings: Sequence[AuRecording],
    model: NmfModel,
    activations: Optional[dict[str, np.ndarray]] = None,
) -> ReconstructionReport:
    """
    R² per AU over all frames and videos; the overall value pools the per-AU sums of squares.
    Activations default to the fitted H for training videos and NNLS projection otherwise.
    """
    activations = dict(activations or {})
    fitted = {vid for vid, _ in model.columns}
    observed, predicted = [], []
    for rec in recordings:
        if rec.video_id not in activations:
            if rec.video_id in fitted:
                activations[rec.video_id] = model.h_for(rec.video_id)
            else:
                activations[rec.video_id] = project_h(rec, model.W, model.d)
        observed.append(rec.au.T)
        predicted.append(model.reconstruct(activations[rec.video_id]))
    V = np.hstack(observed)
    R = np.hstack(predicted)

    ss_res = np.sum((V - R) ** 2, axis=1)
    ss_tot = np.sum((V - V.mean(axis=1, keepdims=True)) ** 2, axis=1)
    per_au: dict[str, Optional[float]] = {}
    zero_variance = []
    for i, au in enumerate(AU_NAMES[: V.shape[0]]):
        if ss_tot[i] == 0:
            per_au[au] = None
            zero_variance.append(au)
        else:
            per_au[au] = float(1.0 - ss_res[i] / ss_tot[i])
    total = float(ss_tot.sum())
    overall = float(1.0 - ss_res.sum() / total) if total > 0 else float("nan")
    if zero_variance:
        logger.warning("Zero-variance AUs excluded from R²: %s", ", ".join(zero_variance))
    return ReconstructionReport(overall_r2=overall, per_au=per_au, zero_variance=zero_variance)


def representative_aus(W: np.ndarray, d: np.ndarray) -> RepresentativeSet:
    loadings = np.asarray(W) * np.asarray(d)
    # argmax returns the first maximum, so ties go to the lower AU index
    return RepresentativeSet(components={c: AU_NAMES[int(np.argmax(loadings[:, c]))] for c in range(loadings.shape[1])})


def export_basis_heatmap(model: NmfModel) -> pd.DataFrame:
    loadings = model.W * model.d
    return pd.DataFrame(
        loadings,
        index=pd.Index(AU_NAMES[: loadings.shape[0]], name="au"),
        columns=[f"component_{c + 1}" for c in range(loadings.shape[1])],
    )
