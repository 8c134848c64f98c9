"""Performance probe run in a fresh process: times one tracking step on the
reference workload (60x96 grid, 640 channels, memory 10, window 50) single
threaded and with 8 workers, materializes the sparse affinity, and reports
peak RSS. Prints a JSON dict on stdout."""

import json
import resource
import sys
import time

import numpy as np

from maskflow import MemoryQueue, TrackerConfig, compute_windowed_affinity, \
    normalize_features, propagate, update_memory
from maskflow.engine import _propagate_scores


def main():
    rng = np.random.default_rng(0)
    hf, wf, c, k, depth = 60, 96, 640, 13, 10
    cfg = TrackerConfig()
    queue = MemoryQueue(capacity=depth)
    for i in range(depth):
        feat = normalize_features(rng.standard_normal((hf, wf, c)).astype(np.float32))
        update_memory(queue, feat, rng.integers(0, k, (hf, wf)), cfg,
                      num_classes=k, frame_index=i + 1)
    query = normalize_features(rng.standard_normal((hf, wf, c)).astype(np.float32))

    t0 = time.perf_counter()
    s1 = _propagate_scores(query, queue.entries, k, cfg.radius, cfg.tau, workers=1)
    single = time.perf_counter() - t0

    t0 = time.perf_counter()
    s8 = _propagate_scores(query, queue.entries, k, cfg.radius, cfg.tau, workers=8)
    parallel = time.perf_counter() - t0

    t0 = time.perf_counter()
    aff = compute_windowed_affinity(query, queue, cfg)
    soft = propagate(aff, queue)
    csr_seconds = time.perf_counter() - t0
    csr_vs_fused = float(np.abs(soft - s1).max())

    maxrss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    print(json.dumps({
        "single_thread_seconds": single,
        "workers8_seconds": parallel,
        "deterministic_across_workers": bool(np.array_equal(s1, s8)),
        "csr_seconds": csr_seconds,
        "csr_entries": int(aff.num_entries),
        "csr_vs_fused_max_abs": csr_vs_fused,
        "peak_rss_gb": maxrss_kb / 1e6,
    }))
    return 0


if __name__ == "__main__":
    sys.exit(main())
