"""Label noise drags the global MI down and marks flipped samples.

Flipping a fraction of the training labels weakens the statistical link
between inputs and labels. The global MI falls monotonically with the flip
rate, and the flipped samples land at strongly negative local scores, so a
simple threshold (or ranking) exposes them without ever looking at the
ground truth.
"""

import numpy as np

import miselect as ms

spec = ms.SyntheticSpec.separated(4, 200, dim=8, separation=10.0, stddev=0.5, seed=0)
clean = ms.generate_synthetic(spec)

print("global MI vs flip rate (N=800, C=4, k=3)")
print(f"{'rate':>6} {'global MI':>10} {'flipped mean':>13} {'clean mean':>11}")
for rate in (0.0, 0.1, 0.2, 0.5, 0.8):
    noisy = ms.flip_labels(clean, rate, seed=42)
    model = ms.fit_pca(noisy, 8)
    emb = ms.transform(model, noisy)
    scores = ms.score_discrete(emb, k=3)
    flipped = emb.label_flipped
    flipped_mean = scores.local_scores[flipped].mean() if flipped.any() else float("nan")
    clean_mean = scores.local_scores[~flipped].mean()
    print(f"{rate:>6.1f} {scores.global_mi:>10.4f} {flipped_mean:>13.4f} {clean_mean:>11.4f}")

# ranking quality at a light corruption level
noisy = ms.flip_labels(clean, 0.1, seed=42)
model = ms.fit_pca(noisy, 8)
emb = ms.transform(model, noisy)
scores = ms.score_discrete(emb, k=3)
flipped = emb.label_flipped
order = np.argsort(scores.local_scores)  # worst first
worst_80 = order[: int(flipped.sum())]
hit_rate = flipped[worst_80].mean()
print(f"\nat flip rate 0.1, the {flipped.sum()} lowest-scored samples are "
      f"{100 * hit_rate:.1f}% actual flips")
print("negative local MI is the signature of a mislabeled point:")
for i in order[:5]:
    print(f"  sample {i}: score={scores.local_scores[i]:+.3f} "
          f"label={emb.labels[i]} original={emb.original_labels[i]}")
