"""Temporal mask tracking via windowed exponential-affinity label propagation.

Given per-frame dense feature maps and a first-frame label mask, each later
frame's mask is predicted as an affinity-weighted vote over the masks of a
bounded queue of preceding frames. The affinity between a query pixel and a
reference pixel is exp(dot/tau), restricted to a square spatial window
(Chebyshev radius window//2) and normalized per query pixel.

Feature maps are (Hf, Wf, C) arrays, soft masks (Hf, Wf, K), label masks
(H, W) integer arrays. Computation follows the floating dtype of the input
features (float32 for the file pipeline, float64 when fed float64 arrays).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigError, DimensionError, MaskflowError

# exp(x) overflows float32 above ~88 and float64 above ~709; normalized
# features bound |logit| by 1/tau, so direct exp is safe below these margins
_DIRECT_EXP_MARGIN = {np.dtype(np.float32): 80.0, np.dtype(np.float64): 700.0}


@dataclass(frozen=True)
class TrackerConfig:
    """Propagation parameters. Defaults reproduce the reference configuration."""

    tau: float = 0.2
    window: int = 50
    memory: int = 10
    memory_mode: str = "hard"  # "hard" stores one-hot argmax, "soft" raw scores
    anchor_first_frame: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.window < 0:
            raise ConfigError(f"window must be >= 0, got {self.window}")
        if self.memory < 1:
            raise ConfigError(f"memory must be >= 1, got {self.memory}")
        if self.memory_mode not in ("hard", "soft"):
            raise ConfigError(f"memory_mode must be 'hard' or 'soft', got {self.memory_mode!r}")

    @property
    def radius(self) -> int:
        return self.window // 2


@dataclass(frozen=True)
class SpatialWindowMask:
    """Square window connectivity between query and reference pixels.

    Admits pair (q, p) iff Chebyshev distance <= radius. radius 0 is identity
    connectivity; radius >= max(H, W) - 1 is fully connected.
    """

    height: int
    width: int
    window: int

    @property
    def radius(self) -> int:
        return self.window // 2

    def row_span(self, y: int):
        """Inclusive admitted row range for query row y."""
        return max(0, y - self.radius), min(self.height - 1, y + self.radius)

    def col_span(self, x: int):
        return max(0, x - self.radius), min(self.width - 1, x + self.radius)

    def admits(self, q, p) -> bool:
        return max(abs(q[0] - p[0]), abs(q[1] - p[1])) <= self.radius

    def counts(self):
        """(H, W) array of admitted reference pixels per query, per frame."""
        r = self.radius
        ys = np.minimum(np.arange(self.height) + r, self.height - 1) - np.maximum(
            np.arange(self.height) - r, 0
        ) + 1
        xs = np.minimum(np.arange(self.width) + r, self.width - 1) - np.maximum(
            np.arange(self.width) - r, 0
        ) + 1
        return np.outer(ys, xs)


def build_spatial_mask(height: int, width: int, window: int) -> SpatialWindowMask:
    if height < 1 or width < 1:
        raise DimensionError(f"grid dims must be >= 1, got {height}x{width}")
    if window < 0:
        raise ConfigError(f"window must be >= 0, got {window}")
    return SpatialWindowMask(height, width, window)


def normalize_features(grid):
    """Scale every pixel vector to unit L2 norm; near-zero vectors become zero.

    Output dtype matches the input. Idempotent up to rounding.
    """
    grid = np.asarray(grid)
    norms = np.sqrt(np.einsum("...c,...c->...", grid, grid, dtype=np.float64))
    safe = np.where(norms < 1e-12, 1.0, norms)
    out = grid / safe[..., None]
    out[norms < 1e-12] = 0.0
    return out.astype(grid.dtype, copy=False)


@dataclass
class MemoryEntry:
    """One reference frame: normalized features plus its mask value matrix.

    values is (Hf*Wf, K) float32: one-hot rows in hard mode, probability rows
    in soft mode. labels is kept alongside in hard mode for fast lookups.
    """

    features: np.ndarray
    values: np.ndarray
    frame_index: int
    labels: np.ndarray | None = None
    _kernel_cache: dict = field(default_factory=dict, repr=False)

    def kernel_features(self, transposed: bool):
        """Features in kernel orientation (contiguous), cached per orientation."""
        key = ("f", transposed)
        if key not in self._kernel_cache:
            arr = self.features.transpose(1, 0, 2) if transposed else self.features
            self._kernel_cache[key] = np.ascontiguousarray(arr)
        return self._kernel_cache[key]

    def kernel_values(self, transposed: bool):
        key = ("v", transposed)
        if key not in self._kernel_cache:
            k = self.values.shape[-1]
            h, w, _ = self.features.shape
            vals = self.values.reshape(h, w, k)
            if transposed:
                vals = vals.transpose(1, 0, 2)
            self._kernel_cache[key] = np.ascontiguousarray(vals).reshape(-1, k)
        return self._kernel_cache[key]


@dataclass
class MemoryQueue:
    """Bounded FIFO of reference frames, oldest first.

    With anchor_first set, the first entry ever pushed is never evicted.
    Confined to a single tracking session; not thread-safe for writes.
    """

    capacity: int
    anchor_first: bool = False
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    @property
    def num_classes(self) -> int:
        if not self.entries:
            raise MaskflowError("no reference frames")
        return self.entries[0].values.shape[-1]


def _as_values(mask, num_classes: int, mode: str):
    """Convert a label or soft mask to (Hf*Wf, K) value rows per memory mode."""
    mask = np.asarray(mask)
    if mask.ndim == 2:  # hard labels
        labels = mask.astype(np.int64)
    elif mask.ndim == 3:
        if mask.shape[-1] != num_classes:
            raise DimensionError(
                f"soft mask has {mask.shape[-1]} classes, expected {num_classes}"
            )
        if mode == "soft":
            return np.ascontiguousarray(mask.reshape(-1, num_classes), dtype=np.float32), None
        labels = argmax_labels(mask).ravel()
    else:
        raise DimensionError(f"mask must be 2- or 3-dimensional, got shape {mask.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DimensionError(f"labels must lie in [0, {num_classes})")
    flat = labels.ravel()
    values = np.zeros((flat.size, num_classes), np.float32)
    values[np.arange(flat.size), flat] = 1.0
    return values, labels.reshape(mask.shape[:2])


def update_memory(queue: MemoryQueue, feat, mask, cfg: TrackerConfig, *,
                  num_classes: int | None = None, frame_index: int = 0) -> MemoryQueue:
    """Append a (feature, mask) pair, evicting the oldest entry beyond capacity.

    In hard mode the mask is stored as the one-hot of its argmax. When the
    queue was built with anchor_first, the first pushed entry is pinned.
    """
    feat = np.asarray(feat)
    mask = np.asarray(mask)
    if feat.ndim != 3:
        raise DimensionError(f"features must be (Hf, Wf, C), got shape {feat.shape}")
    if mask.shape[:2] != feat.shape[:2]:
        raise DimensionError(
            f"mask grid {mask.shape[:2]} does not match feature grid {feat.shape[:2]}"
        )
    if num_classes is None:
        num_classes = queue.num_classes if queue.entries else (
            mask.shape[-1] if mask.ndim == 3 else int(mask.max()) + 1
        )
    if queue.entries and queue.num_classes != num_classes:
        raise DimensionError(
            f"class count mismatch: queue has {queue.num_classes}, push has {num_classes}"
        )
    values, labels = _as_values(mask, num_classes, cfg.memory_mode)
    queue.entries.append(MemoryEntry(feat, values, frame_index, labels))
    while len(queue.entries) > queue.capacity:
        evict_at = 1 if (queue.anchor_first and len(queue.entries) > 1) else 0
        queue.entries.pop(evict_at)
    return queue


def argmax_labels(soft):
    """Per-pixel class of maximal score; ties resolve to the lowest class index."""
    soft = np.asarray(soft)
    if soft.ndim != 3 or soft.shape[-1] < 1:
        raise DimensionError(f"soft mask must be (H, W, K), got shape {soft.shape}")
    return soft.argmax(axis=-1)


def downsample_mask(full, height: int, width: int, num_classes: int):
    """Area-pool a full-resolution label mask into a (height, width, K) soft mask.

    One-hot encodes at full resolution and averages each class channel over
    the source area covered by each target cell; exact for integer ratios and
    area-weighted otherwise. Rows sum to 1.
    """
    full = np.asarray(full)
    if full.ndim != 2:
        raise DimensionError(f"label mask must be 2-dimensional, got shape {full.shape}")
    h, w = full.shape
    if h < height or w < width:
        raise DimensionError(
            f"full mask {h}x{w} smaller than target grid {height}x{width}"
        )
    if full.size and (full.min() < 0 or full.max() >= num_classes):
        raise DimensionError(f"labels must lie in [0, {num_classes})")
    wr = _pool_matrix(height, h)
    wc = _pool_matrix(width, w)
    onehot = np.zeros((h, w, num_classes), np.float64)
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    onehot[ii, jj, full] = 1.0
    out = np.einsum("th,hwk,sw->tsk", wr, onehot, wc, optimize=True)
    return out


def _pool_matrix(target: int, source: int):
    """(target, source) row-stochastic area-overlap pooling weights."""
    m = np.zeros((target, source), np.float64)
    scale = source / target
    for t in range(target):
        lo, hi = t * scale, (t + 1) * scale
        i0, i1 = int(np.floor(lo)), int(np.ceil(hi))
        for i in range(i0, min(i1, source)):
            overlap = min(hi, i + 1) - max(lo, i)
            if overlap > 0:
                m[t, i] = overlap
    m /= m.sum(axis=1, keepdims=True)
    return m


def upsample_soft_mask(soft, height: int, width: int):
    """Bilinear upsampling of a soft mask, half-pixel centers, edge clamped.

    Preserves constants and keeps values inside [0, 1]; identity when sizes
    already match.
    """
    soft = np.asarray(soft)
    if soft.ndim != 3:
        raise DimensionError(f"soft mask must be (H, W, K), got shape {soft.shape}")
    hf, wf, k = soft.shape
    if height < hf or width < wf:
        raise DimensionError(
            f"target {height}x{width} smaller than source grid {hf}x{wf}"
        )
    ur = _lerp_matrix(height, hf)
    uc = _lerp_matrix(width, wf)
    tmp = ur @ soft.reshape(hf, wf * k)
    tmp = tmp.reshape(height, wf, k).transpose(0, 2, 1).reshape(height * k, wf)
    out = tmp @ uc.T
    return out.reshape(height, k, width).transpose(0, 2, 1)


def _lerp_matrix(target: int, source: int):
    """(target, source) bilinear interpolation weights with clamped borders."""
    m = np.zeros((target, source), np.float64)
    pos = (np.arange(target) + 0.5) * (source / target) - 0.5
    pos = np.clip(pos, 0.0, source - 1.0)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, source - 1)
    frac = pos - i0
    m[np.arange(target), i0] += 1.0 - frac
    m[np.arange(target), i1] += frac
    return m


@dataclass(frozen=True)
class WindowedAffinity:
    """Per-query sparse affinity entries over the reference set.

    For query pixel q (row-major), entries live in weights[indptr[q]:indptr[q+1]]
    ordered by (memory frame oldest first, reference row, reference column).
    ref_ids holds frame * Hf * Wf + row-major pixel index. Weights are the
    max-stabilized, per-query-normalized exponential affinities; pairs outside
    the window are absent, not zero.
    """

    height: int
    width: int
    num_frames: int
    radius: int
    indptr: np.ndarray
    ref_ids: np.ndarray
    weights: np.ndarray

    @property
    def num_entries(self) -> int:
        return int(self.indptr[-1])


def _check_reference_set(query, refs: MemoryQueue):
    query = np.asarray(query)
    if query.ndim != 3:
        raise DimensionError(f"query features must be (Hf, Wf, C), got {query.shape}")
    if not refs.entries:
        raise MaskflowError("no reference frames")
    for e in refs.entries:
        if e.features.shape != query.shape:
            raise DimensionError(
                f"reference feature shape {e.features.shape} does not match "
                f"query shape {query.shape}"
            )
    return query


def compute_windowed_affinity(query, refs: MemoryQueue, cfg: TrackerConfig) -> WindowedAffinity:
    """Materialize the sparse windowed affinity of one query frame.

    Entries are exp(dot/tau - M_q) for admitted pairs, normalized so each
    query's weights sum to 1. Expects normalized features (see
    normalize_features).
    """
    query = _check_reference_set(query, refs)
    hf, wf, c = query.shape
    r = cfg.radius
    nf = len(refs.entries)
    win = build_spatial_mask(hf, wf, cfg.window)

    counts_one = win.counts().ravel()
    counts = counts_one * nf
    indptr = np.zeros(hf * wf + 1, np.int64)
    np.cumsum(counts, out=indptr[1:])
    nnz = int(indptr[-1])
    weights = np.empty(nnz, np.float64)
    ref_ids = np.empty(nnz, np.int32)

    dtype = np.promote_types(query.dtype, np.float32)
    qs = (query.reshape(hf * wf, c) / dtype.type(cfg.tau)).astype(dtype, copy=False)
    frame_offsets = (np.arange(nf) * (hf * wf)).astype(np.int32)

    band = _band_rows(hf, wf, r)
    for a0 in range(0, hf, band):
        a1 = min(a0 + band, hf)
        oy, oy1 = max(0, a0 - r), min(hf, a1 - 1 + r + 1)
        sh = oy1 - oy
        q_block = qs[a0 * wf:a1 * wf]
        logits = np.empty((q_block.shape[0], nf, sh * wf), np.float64)
        for f, entry in enumerate(refs.entries):
            rblock = entry.features[oy:oy1].reshape(sh * wf, c).astype(dtype, copy=False)
            logits[:, f, :] = q_block @ rblock.T
        for y in range(a0, a1):
            ry0, ry1 = win.row_span(y)
            rel_rows = np.arange(ry0 - oy, ry1 - oy + 1)
            for x in range(wf):
                rx0, rx1 = win.col_span(x)
                qi = (y - a0) * wf + x
                block_cols = (rel_rows[:, None] * wf + np.arange(rx0, rx1 + 1)).ravel()
                lg = logits[qi][:, block_cols].ravel()
                m = lg.max()
                w = np.exp(lg - m)
                w /= w.sum()
                pix = ((rel_rows + oy)[:, None] * wf + np.arange(rx0, rx1 + 1)).ravel()
                ids = (frame_offsets[:, None] + pix[None, :].astype(np.int32)).ravel()
                start, stop = indptr[y * wf + x], indptr[y * wf + x + 1]
                weights[start:stop] = w
                ref_ids[start:stop] = ids
    return WindowedAffinity(hf, wf, nf, r, indptr, ref_ids, weights)


def propagate(aff: WindowedAffinity, refs: MemoryQueue):
    """Soft mask from a windowed affinity: score(q, c) = sum_p w(q, p) mask_p(c).

    Rows sum to 1 (convex combination of probability rows). Raises on class
    count mismatch across memory entries.
    """
    if not refs.entries:
        raise MaskflowError("no reference frames")
    ks = {e.values.shape[-1] for e in refs.entries}
    if len(ks) != 1:
        raise DimensionError(f"class count mismatch across memory entries: {sorted(ks)}")
    k = ks.pop()
    if len(refs.entries) != aff.num_frames:
        raise DimensionError(
            f"affinity built for {aff.num_frames} frames, queue has {len(refs.entries)}"
        )
    npix = aff.height * aff.width
    scores = np.empty((npix, k), np.float64)
    hard = all(e.labels is not None for e in refs.entries)
    if hard:
        labels_cat = np.concatenate([e.labels.ravel() for e in refs.entries])
    else:
        values_cat = np.concatenate([e.values for e in refs.entries], axis=0)

    chunk = 4096
    for q0 in range(0, npix, chunk):
        q1 = min(q0 + chunk, npix)
        s, e = int(aff.indptr[q0]), int(aff.indptr[q1])
        local_ptr = aff.indptr[q0:q1 + 1] - s
        if hard:
            q_rep = np.repeat(np.arange(q1 - q0), np.diff(local_ptr))
            idx = q_rep * k + labels_cat[aff.ref_ids[s:e]]
            part = np.bincount(idx, weights=aff.weights[s:e], minlength=(q1 - q0) * k)
            scores[q0:q1] = part.reshape(q1 - q0, k)
        else:
            vals = values_cat[aff.ref_ids[s:e]].astype(np.float64)
            vals *= aff.weights[s:e, None]
            scores[q0:q1] = np.add.reduceat(vals, local_ptr[:-1], axis=0)
    return scores.reshape(aff.height, aff.width, k)


def _band_rows(a: int, b: int, r: int) -> int:
    """Band height keeping each (band, frame) logit block cache-resident."""
    per_row = max(1, (2 * r + 1)) * b * b
    return max(1, min(a, int(np.ceil(500_000 / per_row))))


def _propagate_scores(query, entries, num_classes: int, radius: int, tau: float,
                      workers: int = 1):
    """Fused affinity + mask product for one frame; returns (Hf, Wf, K) float64.

    Banded over the longer grid axis: per band and memory frame, a dense
    logit block against the band's reference slab is exponentiated in cache,
    out-of-window entries are zeroed, and class scores accumulate through a
    matmul with the frame's value rows. Scores are normalized per query at
    the end, which equals per-query softmax weighting exactly.

    BLAS is pinned to one thread; parallelism comes only from disjoint bands,
    so results are bit-identical for any worker count.
    """
    hf, wf, c = query.shape
    transposed = wf > hf
    a, b = (wf, hf) if transposed else (hf, wf)
    qk = np.ascontiguousarray(query.transpose(1, 0, 2)) if transposed else query
    dtype = np.promote_types(query.dtype, np.float32)
    inv_tau = dtype.type(1.0 / tau)
    qs = np.ascontiguousarray((qk.reshape(a * b, c) * inv_tau).astype(dtype, copy=False))
    feats = [e.kernel_features(transposed).astype(dtype, copy=False) for e in entries]
    values = [e.kernel_values(transposed) for e in entries]
    direct_exp = (1.0 / tau) <= _DIRECT_EXP_MARGIN[dtype]

    out = np.empty((a * b, num_classes), np.float64)
    r = radius
    band = _band_rows(a, b, r)
    bands = [(a0, min(a0 + band, a)) for a0 in range(0, a, band)]

    def run_band(bounds):
        a0, a1 = bounds
        oa, oa1 = max(0, a0 - r), min(a, a1 - 1 + r + 1)
        sh = oa1 - oa
        q_block = qs[a0 * b:a1 * b]
        acc = np.zeros(((a1 - a0) * b, num_classes), np.float64)
        stash = [] if not direct_exp else None
        for f in range(len(feats)):
            rblock = feats[f][oa:oa1].reshape(sh * b, c)
            g = q_block @ rblock.T
            if direct_exp:
                e = np.exp(g, out=g)
                _zero_outside_window(e, a0, a1, a, b, oa, sh, r)
                acc += (e @ values[f][oa * b:oa1 * b]).astype(np.float64, copy=False)
            else:
                _fill_outside_window(g, a0, a1, a, b, oa, sh, r)
                stash.append(g)
        if not direct_exp:
            m = stash[0].max(axis=1)
            for g in stash[1:]:
                np.maximum(m, g.max(axis=1), out=m)
            for f, g in enumerate(stash):
                g -= m[:, None]
                e = np.exp(g, out=g)
                acc += (e @ values[f][oa * b:oa1 * b]).astype(np.float64, copy=False)
        acc /= acc.sum(axis=1, keepdims=True)
        out[a0 * b:a1 * b] = acc

    with threadpool_limits(limits=1, user_api="blas"):
        if workers <= 1 or len(bands) == 1:
            for bounds in bands:
                run_band(bounds)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run_band, bands))

    scores = out.reshape(a, b, num_classes)
    return scores.transpose(1, 0, 2) if transposed else scores


def _zero_outside_window(e, a0, a1, a, b, oa, sh, r):
    e4 = e.reshape(a1 - a0, b, sh, b)
    for ai in range(a0, a1):
        lo, hi = max(0, ai - r) - oa, min(a - 1, ai + r) - oa
        if lo > 0:
            e4[ai - a0, :, :lo, :] = 0.0
        if hi + 1 < sh:
            e4[ai - a0, :, hi + 1:, :] = 0.0
    for bi in range(b):
        if bi - r > 0:
            e4[:, bi, :, :bi - r] = 0.0
        if bi + r + 1 < b:
            e4[:, bi, :, bi + r + 1:] = 0.0


def _fill_outside_window(g, a0, a1, a, b, oa, sh, r):
    g4 = g.reshape(a1 - a0, b, sh, b)
    for ai in range(a0, a1):
        lo, hi = max(0, ai - r) - oa, min(a - 1, ai + r) - oa
        if lo > 0:
            g4[ai - a0, :, :lo, :] = -np.inf
        if hi + 1 < sh:
            g4[ai - a0, :, hi + 1:, :] = -np.inf
    for bi in range(b):
        if bi - r > 0:
            g4[:, bi, :, :bi - r] = -np.inf
        if bi + r + 1 < b:
            g4[:, bi, :, bi + r + 1:] = -np.inf


def _resolve_workers(workers: int | None) -> int:
    env = os.environ.get("MASKFLOW_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"MASKFLOW_THREADS must be an integer, got {env!r}")
    return max(1, workers or 1)


def track_video_iter(features, first_mask, num_classes: int, cfg: TrackerConfig,
                     workers: int | None = 1):
    """Yield (frame_index, full-resolution label mask) for frames 2..N.

    Strictly causal: the prediction for frame i uses only frames before i.
    first_mask is the full-resolution ground truth of frame 1; its grid must
    be at least as large as the feature grid in both dimensions.
    """
    if len(features) < 1:
        raise DimensionError("at least one frame of features is required")
    first_mask = np.asarray(first_mask)
    shape = np.asarray(features[0]).shape
    if len(shape) != 3:
        raise DimensionError(f"features must be (Hf, Wf, C), got shape {shape}")
    for i, f in enumerate(features):
        if np.asarray(f).shape != shape:
            raise DimensionError(
                f"feature shape mismatch at frame {i + 1}: {np.asarray(f).shape} != {shape}"
            )
    hf, wf, _ = shape
    h, w = first_mask.shape
    if h < hf or w < wf:
        raise DimensionError(
            f"first mask {h}x{w} smaller than feature grid {hf}x{wf}"
        )
    if first_mask.size and (first_mask.min() < 0 or first_mask.max() >= num_classes):
        raise DimensionError(f"first mask labels must lie in [0, {num_classes})")
    workers = _resolve_workers(workers)

    queue = MemoryQueue(capacity=cfg.memory, anchor_first=cfg.anchor_first_frame)
    first_soft = downsample_mask(first_mask, hf, wf, num_classes)
    update_memory(queue, normalize_features(features[0]), first_soft, cfg,
                  num_classes=num_classes, frame_index=1)

    for i in range(1, len(features)):
        qfeat = normalize_features(features[i])
        scores = _propagate_scores(qfeat, queue.entries, num_classes,
                                   cfg.radius, cfg.tau, workers)
        full = upsample_soft_mask(scores, h, w) if (h, w) != (hf, wf) else scores
        labels = argmax_labels(full)
        yield i + 1, labels
        update_memory(queue, qfeat, scores, cfg,
                      num_classes=num_classes, frame_index=i + 1)


def track_video(features, first_mask, num_classes: int, cfg: TrackerConfig,
                workers: int | None = 1):
    """Track the first-frame mask through the video; returns N-1 label masks."""
    return [m for _, m in track_video_iter(features, first_mask, num_classes, cfg, workers)]
