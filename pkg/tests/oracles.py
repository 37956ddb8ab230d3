"""Slow, loop-based reference computations used as independent test oracles."""

import math


def recount_metrics(y_true, y_pred, n_classes=4):
    """Per-class counts by direct enumeration, then the macro averages."""
    n = len(y_true)
    prec, rec, f1, acc = [], [], [], []
    for c in range(n_classes):
        tp = fp = fn = tn = 0
        for t, p in zip(y_true, y_pred):
            if t == c and p == c:
                tp += 1
            elif t != c and p == c:
                fp += 1
            elif t == c and p != c:
                fn += 1
            else:
                tn += 1
        pc = tp / (tp + fp) if tp + fp else 0.0
        rc = tp / (tp + fn) if tp + fn else 0.0
        prec.append(pc)
        rec.append(rc)
        f1.append(2 * pc * rc / (pc + rc) if pc + rc else 0.0)
        acc.append((tp + tn) / n)
    top1 = sum(1 for t, p in zip(y_true, y_pred) if t == p) / n
    mean = lambda xs: sum(xs) / len(xs)
    return {"macro_precision": mean(prec), "macro_recall": mean(rec), "macro_f1": mean(f1),
            "avg_accuracy_ovr": mean(acc), "accuracy_top1": top1}


def enumerate_splits(X, g, h, lam, min_leaf):
    """Every admissible (feature, threshold, gain), gains from explicit sums."""
    n = len(X)
    d = len(X[0])
    G = sum(g)
    H = sum(h)
    parent = G * G / (H + lam)
    out = []
    for f in range(d):
        values = sorted(set(row[f] for row in X))
        for a, b in zip(values, values[1:]):
            thr = (a + b) / 2
            if thr >= b:
                thr = a
            gl = hl = 0.0
            nl = 0
            for i in range(n):
                if X[i][f] <= thr:
                    gl += g[i]
                    hl += h[i]
                    nl += 1
            if nl < min_leaf or n - nl < min_leaf:
                continue
            gr, hr = G - gl, H - hl
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent)
            out.append((f, thr, gain))
    return out, 0.5 * parent


def brute_force_split(X, g, h, lam, min_leaf, rtol=1e-10):
    """Lowest (feature, threshold) among candidates tied with the best gain."""
    cands, half_parent = enumerate_splits(X, g, h, lam, min_leaf)
    if not cands:
        return None
    best = max(c[2] for c in cands)
    scale = max(1.0, half_parent, abs(best))
    if best <= rtol * scale:
        return None
    tied = [c for c in cands if c[2] >= best - rtol * scale]
    return min(tied, key=lambda c: (c[0], c[1]))


def sample_logloss(scores, y):
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores)) - scores[y]
