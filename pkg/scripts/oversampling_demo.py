"""Minority-class oversampling on a synthetic imbalanced table.

Builds a 5-feature table with about 1% positives and splits it stratified.
A noise model is trained on the training positives only, and its samples are
appended as extra positives. A logistic-regression classifier fitted with and
without the synthetic rows is then scored on the untouched test part.

The classifier is a small numpy logistic regression so the demo needs no
extra dependencies; the real credit-card table is not bundled.
"""

import argparse

import numpy as np

from ou_diffuse.data import SampleMatrix, apply_scaler, augment, fit_scaler, split
from ou_diffuse.model import TrainConfig
from ou_diffuse.sampler import GenerationConfig, generate_batch
from ou_diffuse.schedule import build_schedule
from ou_diffuse.stats import classification_metrics
from ou_diffuse.trainer import train


def make_table(m, seed):
    rng = np.random.default_rng(seed)
    y = (rng.random(m) < 0.01).astype(np.int64)
    x = rng.standard_normal((m, 5))
    # positives sit on a curved arc in the first two features and are shifted
    # in the third, overlapping the bulk only partly
    k = int(y.sum())
    ang = rng.uniform(0, np.pi, k)
    x[y == 1, 0] = 2.5 * np.cos(ang) + 0.3 * rng.standard_normal(k)
    x[y == 1, 1] = 2.5 * np.sin(ang) + 0.3 * rng.standard_normal(k)
    x[y == 1, 2] = 1.5 + 0.5 * rng.standard_normal(k)
    return SampleMatrix(x, [f"V{j + 1}" for j in range(5)], y, "Class")


def quad_features(x):
    i, j = np.triu_indices(x.shape[1])
    return np.hstack([x, x[:, i] * x[:, j]])


def fit_logistic(x, y, iters=30, l2=1e-2):
    """Ridge-penalized logistic regression on quadratic features, by Newton steps."""
    f = np.hstack([np.ones((len(y), 1)), quad_features(x)])
    w = np.zeros(f.shape[1])
    penalty = l2 * np.eye(f.shape[1])
    penalty[0, 0] = 0.0
    for _ in range(iters):
        p = 1 / (1 + np.exp(-(f @ w)))
        grad = f.T @ (p - y) + penalty @ w
        hess = (f * (p * (1 - p))[:, None]).T @ f + penalty
        w -= np.linalg.solve(hess, grad)
    return lambda z: (np.hstack([np.ones((len(z), 1)), quad_features(z)]) @ w > 0).astype(np.int64)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=30_000)
    ap.add_argument("--synthetic", type=int, default=2000)
    ap.add_argument("--epochs", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    table = make_table(args.rows, args.seed)
    tr, te = split(table, 0.2, seed=args.seed)
    pos = tr.select_class(1)
    print(f"train {tr.n_rows} rows ({int(tr.labels.sum())} positive), test {te.n_rows} rows "
          f"({int(te.labels.sum())} positive)")

    scaler = fit_scaler(pos)
    model, rep = train(apply_scaler(pos, scaler), build_schedule(),
                       TrainConfig(epochs=args.epochs, batch_size=64, seed=args.seed), scaler=scaler)
    print(f"noise model trained on {pos.n_rows} positives in {rep.wall_time:.0f}s")
    syn = generate_batch(model, GenerationConfig(args.synthetic, seed=args.seed))
    aug = augment(tr, syn, 1)

    feat_scaler = fit_scaler(tr)
    for name, data in (("original", tr), ("augmented", aug)):
        clf = fit_logistic(apply_scaler(data.features, feat_scaler), data.labels.astype(float))
        r = classification_metrics(clf(apply_scaler(te.features, feat_scaler)), te.labels)
        fmt = lambda v: "undefined" if v is None else f"{v:.4f}"
        print(f"{name:>9}: tp={r.tp} fp={r.fp} fn={r.fn}  precision={fmt(r.precision)} "
              f"recall={fmt(r.recall)} f1={fmt(r.f1)}")


if __name__ == "__main__":
    main()
