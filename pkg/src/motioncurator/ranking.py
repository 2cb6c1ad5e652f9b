"""Representativeness ranking of motion sequences in feature space.

Sequences are moved one by one (or k at a time) from the unranked pool into
the ranked list. Each round a small binary classifier is trained to tell
ranked from unranked features, and the unranked element it most confidently
assigns to the unranked side — the one least like everything ranked so far —
is selected next. This approximates farthest point sampling with a per-round
cost that does not grow with the ranked set, and an exact brute-force FPS
oracle is provided for cross-checking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn


@dataclass(frozen=True)
class Ranking:
    """Permutation of sequence ids, most representative first.

    scores[i] is the selection score of order[i]: the discriminator's
    unranked-side probability in classifier mode, the min distance to the
    already-ranked set in oracle mode. The seed element has no score of its
    own and carries inf.
    """

    order: list[str]
    scores: list[float]
    seed: int | None = None

    def __post_init__(self):
        if len(self.order) != len(self.scores):
            raise ValueError("order and scores must have equal length")
        if len(set(self.order)) != len(self.order):
            raise ValueError("ranking order contains duplicate ids")


def ranking_to_json(ranking: Ranking) -> str:
    scores = [s if math.isfinite(s) else None for s in ranking.scores]
    return json.dumps({"seed": ranking.seed, "order": ranking.order, "scores": scores})


def ranking_from_json(text: str) -> Ranking:
    doc = json.loads(text)
    scores = [math.inf if s is None else float(s) for s in doc["scores"]]
    return Ranking(order=list(doc["order"]), scores=scores, seed=doc.get("seed"))


def save_ranking(ranking: Ranking, path: str | Path) -> None:
    Path(path).write_text(ranking_to_json(ranking) + "\n")


def load_ranking(path: str | Path) -> Ranking:
    return ranking_from_json(Path(path).read_text())


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Three affine layers, retrained from scratch every round."""

    hidden: tuple[int, int] = (64, 32)
    epochs: int = 20
    lr: float = 1e-2
    batch_add: int = 1
    batch_size: int = 128
    max_per_class: int = 512   # caps the per-round training set size
    warm_start: bool = False

    def __post_init__(self):
        if len(self.hidden) != 2:
            raise ValueError("discriminator has exactly three affine layers (two hidden widths)")
        if self.batch_add < 1:
            raise ValueError("batch_add must be >= 1")


def _init_linear(layer: nn.Linear, rng: np.random.Generator) -> None:
    fan_in = layer.in_features
    bound = math.sqrt(6.0 / fan_in)
    layer.weight.data = torch.from_numpy(
        rng.uniform(-bound, bound, size=layer.weight.shape).astype(np.float32)
    )
    b = 1.0 / math.sqrt(fan_in)
    layer.bias.data = torch.from_numpy(
        rng.uniform(-b, b, size=layer.bias.shape).astype(np.float32)
    )


class _Discriminator(nn.Module):
    def __init__(self, feature_dim: int, cfg: DiscriminatorConfig, rng: np.random.Generator):
        super().__init__()
        h1, h2 = cfg.hidden
        self.layers = nn.Sequential(
            nn.Linear(feature_dim, h1), nn.ReLU(),
            nn.Linear(h1, h2), nn.ReLU(),
            nn.Linear(h2, 1),
        )
        for module in self.layers:
            if isinstance(module, nn.Linear):
                _init_linear(module, rng)

    def forward(self, x):
        return self.layers(x).squeeze(-1)


def _balanced_indices(
    ranked: np.ndarray, pool: np.ndarray, cap: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Cap each side at `cap`, then oversample the minority to match."""
    def capped(idx):
        if len(idx) > cap:
            return rng.choice(idx, size=cap, replace=False)
        return idx

    a, b = capped(ranked), capped(pool)
    n = max(len(a), len(b))
    return np.resize(a, n), np.resize(b, n)


def _train_discriminator(
    features: np.ndarray,
    ranked_rows: np.ndarray,
    pool_rows: np.ndarray,
    cfg: DiscriminatorConfig,
    rng: np.random.Generator,
    model: _Discriminator | None,
) -> _Discriminator:
    if model is None:
        model = _Discriminator(features.shape[1], cfg, rng)
    a, b = _balanced_indices(ranked_rows, pool_rows, cfg.max_per_class, rng)
    x = torch.from_numpy(features[np.concatenate([a, b])].astype(np.float32))
    y = torch.from_numpy(
        np.concatenate([np.zeros(len(a)), np.ones(len(b))]).astype(np.float32)
    )
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = nn.BCEWithLogitsLoss()
    n = len(y)
    model.train()
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            opt.zero_grad()
            loss = loss_fn(model(x[sel]), y[sel])
            loss.backward()
            opt.step()
    model.eval()
    return model


def _as_feature_matrix(features: dict[str, np.ndarray]) -> tuple[list[str], np.ndarray]:
    ids = sorted(features)
    mat = np.stack([np.asarray(features[i], dtype=np.float64) for i in ids])
    if mat.ndim != 2:
        raise ValueError("features must be a map id -> 1-D vector")
    return ids, mat


def rank(
    features: dict[str, np.ndarray],
    cfg: DiscriminatorConfig | None = None,
    seed: int = 0,
    limit: int | None = None,
) -> Ranking:
    """Order sequences by representativeness via iterative binary classification.

    Starts from a uniformly random element, then repeats: train a (fresh)
    discriminator on ranked-vs-unranked, move the top batch_add unranked
    elements by unranked-side probability into the ranking. ``limit`` stops
    after that many selections and returns the prefix (used by experiment
    harnesses); a full run returns a permutation of all ids.

    Deterministic given (features, cfg, seed); does not touch global RNG state.
    """
    if not features:
        raise ValueError("cannot rank an empty feature map")
    cfg = cfg or DiscriminatorConfig()
    ids, mat = _as_feature_matrix(features)
    n = len(ids)
    rng = np.random.default_rng(seed)

    first = int(rng.integers(n))
    order = [first]
    scores = [math.inf]
    pool = [i for i in range(n) if i != first]
    stop = n if limit is None else min(limit, n)

    x_all = torch.from_numpy(mat.astype(np.float32))
    model: _Discriminator | None = None
    while pool and len(order) < stop:
        trained = _train_discriminator(
            mat, np.array(order), np.array(pool), cfg, rng,
            model if cfg.warm_start else None,
        )
        if cfg.warm_start:
            model = trained
        with torch.no_grad():
            probs = torch.sigmoid(trained(x_all[pool])).numpy().astype(np.float64)
        # most confidently unranked first; ties broken by id for determinism
        by_score = sorted(range(len(pool)), key=lambda r: (-probs[r], ids[pool[r]]))
        take = by_score[: min(cfg.batch_add, stop - len(order))]
        chosen = [pool[r] for r in take]
        order.extend(chosen)
        scores.extend(float(probs[r]) for r in take)
        pool = [i for i in pool if i not in set(chosen)]

    return Ranking(order=[ids[i] for i in order], scores=scores, seed=seed)


def fps_oracle(
    features: dict[str, np.ndarray],
    start_id: str | None = None,
    seed: int | None = None,
) -> Ranking:
    """Exact farthest point sampling on the feature vectors.

    Repeatedly selects the unranked point with the largest Euclidean distance
    to its nearest ranked point, breaking distance ties lexicographically by
    id. Either ``start_id`` names the seed element or it is drawn by ``seed``.
    """
    if not features:
        raise ValueError("cannot rank an empty feature map")
    ids, mat = _as_feature_matrix(features)
    n = len(ids)
    if start_id is None:
        rng = np.random.default_rng(seed or 0)
        start = int(rng.integers(n))
    else:
        try:
            start = ids.index(start_id)
        except ValueError:
            raise KeyError(f"unknown start id {start_id!r}") from None

    order = [start]
    scores = [math.inf]
    min_dist = np.linalg.norm(mat - mat[start], axis=1)
    selected = np.zeros(n, dtype=bool)
    selected[start] = True
    for _ in range(n - 1):
        # farthest-from-ranked first; distance ties broken by ascending id
        best = min(
            (i for i in range(n) if not selected[i]),
            key=lambda i: (-min_dist[i], ids[i]),
        )
        order.append(best)
        scores.append(float(min_dist[best]))
        selected[best] = True
        np.minimum(min_dist, np.linalg.norm(mat - mat[best], axis=1), out=min_dist)
    return Ranking(order=[ids[i] for i in order], scores=scores, seed=seed)


def prefix(ranking: Ranking, budget: int | float) -> list[str]:
    """First ids of the ranking covering an absolute or fractional budget.

    Budgets below 1 are fractions of N and resolve by rounding to the nearest
    count (at least one), so a 0.1961 budget of 102 sequences yields 20 ids;
    budgets of 1 or more are absolute counts.
    """
    n = len(ranking.order)
    if 0 < budget < 1:
        count = max(1, int(math.floor(budget * n + 0.5)))
    else:
        count = int(budget)
        if count != budget:
            raise ValueError(f"absolute budget must be an integer, got {budget}")
    if not 0 < count <= n:
        raise ValueError(f"budget {budget} resolves to {count}, outside 1..{n}")
    return ranking.order[:count]


def resampled_raw_features(frames_by_id: dict[str, np.ndarray], length: int = 64) -> dict[str, np.ndarray]:
    """Flattened, length-resampled raw coordinates as unit-norm pseudo-features.

    The ablation baseline that ranks on raw motion data instead of learned
    representations: every sequence is linearly resampled to ``length``
    frames, flattened, and L2-normalized.
    """
    out = {}
    for seq_id, frames in frames_by_id.items():
        T = frames.shape[0]
        src = np.linspace(0.0, T - 1.0, length)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, T - 1)
        w = (src - lo)[:, None, None]
        resampled = frames[lo] * (1.0 - w) + frames[hi] * w
        flat = resampled.reshape(-1)
        norm = np.linalg.norm(flat)
        out[seq_id] = flat / norm if norm > 0 else flat
    return out
