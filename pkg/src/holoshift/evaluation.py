"""Reconstruction-quality statistics over packet subsets.

For each subset size m this module reconstructs from every one of the
C(K, m) subsets, reports mean and population variance of the MSEs along
with mean/std of the PSNRs, and checks two qualitative properties: whether
the subset-size-m MSE variance stays below a threshold sigma^2 (similar
usefulness of the packets) and whether the average MSE strictly decreases
as m grows (progressive refinement on average).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Sequence

import numpy as np

from .errors import InvalidConfig
from .holographic import (
    PacketSet,
    back_shifted_packets,
    mean_images,
    mode_label,
    reconstruct,
)
from .imaging import require_image

__all__ = [
    "psnr",
    "enumerate_subsets",
    "subset_mse",
    "SubsetStats",
    "EvaluationReport",
    "evaluate",
    "psnr_order_curves",
    "report_to_json",
    "report_to_csv",
    "curves_to_csv",
]

_PEAK = 255.0


def psnr(mse: float) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit range; inf when MSE is 0."""
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_PEAK * _PEAK / mse)


def enumerate_subsets(K: int, m: int) -> list[tuple[int, ...]]:
    """All strictly increasing m-tuples from 1..K, lexicographic order."""
    if not 1 <= m <= K:
        raise InvalidConfig(f"m must be in [1, K]={K}, got {m}")
    return list(combinations(range(1, K + 1), m))


def subset_mse(x: np.ndarray, ps: PacketSet, indices: Sequence[int]) -> float:
    """MSE of the reconstruction from the given packets, on the original support."""
    arr = require_image(x)
    d = arr - reconstruct(ps, indices)
    return float(np.mean(d * d))


@dataclass
class SubsetStats:
    m: int
    mean_mse: float
    var_mse: float
    mean_psnr: float
    std_psnr: float
    per_subset: list[tuple[tuple[int, ...], float, float]]


@dataclass
class EvaluationReport:
    config: dict
    per_m: list[SubsetStats]
    sigma: float
    sigma_similarity: dict[int, bool]
    progressive_refinement: bool
    mean_mse_by_m: list[float]


def _mean_and_spread(values: np.ndarray) -> tuple[float, float]:
    """Population mean and variance; exact (and inf-safe) for equal values.

    The mean of n identical floats is that float, but a summed mean can be
    off by an ulp (and the variance then spuriously nonzero), which matters
    because duplicate packet sets must report exactly flat statistics.
    """
    if np.all(values == values[0]):
        return float(values[0]), 0.0
    mean = float(np.mean(values))
    return mean, float(np.mean((values - mean) ** 2))


def _stats_for(m: int, entries: list[tuple[tuple[int, ...], float, float]]) -> SubsetStats:
    mean_mse, var_mse = _mean_and_spread(np.array([e[1] for e in entries]))
    mean_psnr, var_psnr = _mean_and_spread(np.array([e[2] for e in entries]))
    return SubsetStats(m, mean_mse, var_mse, mean_psnr, float(np.sqrt(var_psnr)), entries)


def evaluate(x: np.ndarray, ps: PacketSet, sigma: float = 0.0) -> EvaluationReport:
    """Full per-m report over every subset of every size.

    Each packet is decoded once; subset reconstructions reuse the decoded
    images, which matches :func:`subset_mse` bit for bit because the
    averaging path is identical.
    """
    arr = require_image(x)
    if sigma < 0:
        raise InvalidConfig(f"sigma must be >= 0, got {sigma}")
    back = back_shifted_packets(ps)
    per_m = []
    for m in range(1, ps.K + 1):
        entries = []
        for combo in enumerate_subsets(ps.K, m):
            recon = mean_images([back[i - 1] for i in combo])
            d = arr - recon
            mse = float(np.mean(d * d))
            entries.append((combo, mse, psnr(mse)))
        per_m.append(_stats_for(m, entries))
    means = [s.mean_mse for s in per_m]
    progressive = all(means[i] > means[i + 1] for i in range(len(means) - 1))
    similarity = {s.m: s.var_mse <= sigma * sigma for s in per_m}
    h, w = ps.original_dims
    config = {
        "height": h,
        "width": w,
        "K": ps.K,
        "mode_tag": ps.mode_tag,
        "mode": mode_label(ps.mode_tag),
        "codec_id": ps.codec.codec_id,
        "theta": ps.codec.theta,
        "block_size": ps.codec.block_size,
    }
    return EvaluationReport(config, per_m, sigma, similarity, progressive, means)


def psnr_order_curves(
    x: np.ndarray,
    ps: PacketSet,
    sample_orders: int | None = None,
    seed: int = 0,
) -> list[tuple[int, int, float]]:
    """PSNR of prefix reconstructions for packet-append orders.

    Yields one row (order_id, m, psnr) per prefix of each order of the K
    packets; all K! orders are enumerated lexicographically. Above K = 9
    full enumeration is refused unless ``sample_orders`` asks for a random
    sample of orders instead. Equal prefix sets share a cached PSNR.
    """
    arr = require_image(x)
    K = ps.K
    if sample_orders is not None:
        if sample_orders < 1:
            raise InvalidConfig(f"sample_orders must be >= 1, got {sample_orders}")
        rng = np.random.default_rng(seed)
        orders = [tuple(rng.permutation(K) + 1) for _ in range(sample_orders)]
    else:
        if K > 9:
            raise InvalidConfig(f"K={K} means {math.factorial(K)} orders; pass sample_orders")
        orders = list(permutations(range(1, K + 1)))

    back = back_shifted_packets(ps)
    cache: dict[tuple[int, ...], float] = {}
    rows = []
    for order_id, order in enumerate(orders, start=1):
        for m in range(1, K + 1):
            key = tuple(sorted(order[:m]))
            value = cache.get(key)
            if value is None:
                recon = mean_images([back[i - 1] for i in key])
                d = arr - recon
                value = psnr(float(np.mean(d * d)))
                cache[key] = value
            rows.append((order_id, m, value))
    return rows


def report_to_json(report: EvaluationReport) -> str:
    doc = {
        "config": report.config,
        "sigma": report.sigma,
        "progressive_refinement": report.progressive_refinement,
        "mean_mse_by_m": report.mean_mse_by_m,
        "sigma_similarity": {str(m): v for m, v in sorted(report.sigma_similarity.items())},
        "per_m": [
            {
                "m": s.m,
                "mean_mse": s.mean_mse,
                "var_mse": s.var_mse,
                "mean_psnr": s.mean_psnr,
                "std_psnr": s.std_psnr,
                "subsets": [
                    {"indices": list(c), "mse": mse, "psnr": p}
                    for c, mse, p in s.per_subset
                ],
            }
            for s in report.per_m
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def report_to_csv(report: EvaluationReport) -> str:
    lines = ["m,subset,mse,psnr"]
    for s in report.per_m:
        for combo, mse, p in s.per_subset:
            lines.append(f"{s.m},{'+'.join(map(str, combo))},{mse!r},{p!r}")
    return "\n".join(lines) + "\n"


def curves_to_csv(rows: list[tuple[int, int, float]]) -> str:
    lines = ["order_id,m,psnr"]
    for order_id, m, value in rows:
        lines.append(f"{order_id},{m},{value!r}")
    return "\n".join(lines) + "\n"
