"""Classification and retrieval metrics.

ROC-AUC uses the rank formulation with midranks, so tied scores count
half. PR-AUC is average precision via the threshold sweep over distinct
score values. Retrieval metrics rank references by descending similarity
(dot product by default), break ties toward the lower reference index,
and average per-query AP, precision-at-10 (hits/10), and the rank of the
first relevant reference.
"""

import numpy as np

from .errors import UndefinedMetricError


def _midranks(values):
    """1-based ranks; tied values share the average of their positions."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels):
    """P(random positive outscores random negative), ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.count_nonzero(labels == 1))
    n_neg = int(np.count_nonzero(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"ROC-AUC needs both classes, got {n_pos} positives and {n_neg} negatives"
        )
    ranks = _midranks(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pr_auc(scores, labels):
    """Average precision: sum over distinct thresholds of P * delta-recall."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.count_nonzero(labels == 1))
    if n_pos == 0:
        raise UndefinedMetricError("PR-AUC needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = (labels[order] == 1).astype(np.float64)
    tp = np.cumsum(sorted_labels)
    ranks = np.arange(1, scores.size + 1, dtype=np.float64)
    # threshold boundaries: last index of each tied group
    boundary = np.ones(scores.size, dtype=bool)
    boundary[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    precision = tp[boundary] / ranks[boundary]
    recall = tp[boundary] / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def macro_auc(scores, labels):
    """Tag-wise mean ROC-AUC / PR-AUC over (N, T) multi-label arrays.

    Tags missing a class in `labels` are skipped; returns (roc, pr,
    n_tags_used). Raises if no tag is usable.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise UndefinedMetricError(
            f"macro metrics need matching (N, T) arrays, got {scores.shape} and {labels.shape}"
        )
    rocs, prs = [], []
    for t in range(scores.shape[1]):
        col = labels[:, t]
        if np.count_nonzero(col == 1) == 0 or np.count_nonzero(col == 0) == 0:
            continue
        rocs.append(roc_auc(scores[:, t], col))
        prs.append(pr_auc(scores[:, t], col))
    if not rocs:
        raise UndefinedMetricError("no tag has both classes present")
    return float(np.mean(rocs)), float(np.mean(prs)), len(rocs)


def _ranked_references(query, refs, exclude):
    sims = refs @ query
    order = np.lexsort((np.arange(refs.shape[0]), -sims))
    return np.array([i for i in order if not exclude[i]], dtype=np.int64)


def average_precision_at_ranks(relevant_ranks, n_relevant):
    """AP from the sorted 1-based ranks of the relevant items."""
    if n_relevant == 0:
        raise UndefinedMetricError("average precision needs at least one relevant item")
    ranks = np.sort(np.asarray(relevant_ranks, dtype=np.float64))
    hits = np.arange(1, ranks.size + 1, dtype=np.float64)
    return float(np.sum(hits / ranks) / n_relevant)


def retrieval_eval(queries, refs, query_cliques, ref_cliques,
                   query_ids=None, ref_ids=None, similarity="dot"):
    """Mean AP, precision-at-10, and mean first-hit rank over all queries.

    `query_ids`/`ref_ids` identify items so a query present in the
    reference set is excluded from its own ranking. Every query must have
    at least one clique member among the (remaining) references.
    """
    queries = np.asarray(queries, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    if refs.shape[0] == 0:
        raise UndefinedMetricError("empty reference set")
    query_cliques = np.asarray(query_cliques)
    ref_cliques = np.asarray(ref_cliques)
    if similarity == "cosine":
        queries = queries / np.maximum(np.linalg.norm(queries, axis=1, keepdims=True), 1e-12)
        refs = refs / np.maximum(np.linalg.norm(refs, axis=1, keepdims=True), 1e-12)
    elif similarity != "dot":
        raise ValueError(f"unknown similarity {similarity!r}")

    aps, p10s, first_ranks = [], [], []
    for qi in range(queries.shape[0]):
        exclude = np.zeros(refs.shape[0], dtype=bool)
        if query_ids is not None and ref_ids is not None:
            exclude = np.asarray([rid == query_ids[qi] for rid in ref_ids])
        ranked = _ranked_references(queries[qi], refs, exclude)
        rel = ref_cliques[ranked] == query_cliques[qi]
        n_rel = int(np.count_nonzero(rel))
        if n_rel == 0:
            raise UndefinedMetricError(
                f"query {qi} has no clique member among the references"
            )
        rel_ranks = np.flatnonzero(rel) + 1
        aps.append(average_precision_at_ranks(rel_ranks, n_rel))
        p10s.append(float(np.count_nonzero(rel[:10])) / 10.0)
        first_ranks.append(float(rel_ranks[0]))
    return float(np.mean(aps)), float(np.mean(p10s)), float(np.mean(first_ranks))


def label_fraction_subsample(n_items, fraction, seed):
    """Reproducible uniform subset of indices, size max(1, round(f*N))."""
    if n_items < 1:
        raise UndefinedMetricError("cannot subsample an empty dataset")
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    size = max(1, int(np.floor(fraction * n_items + 0.5)))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(3,)))
    return np.sort(rng.choice(n_items, size=size, replace=False))
