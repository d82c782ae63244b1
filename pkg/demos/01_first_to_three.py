"""Ternary labeling and first-to-three aggregation, on its own.

Each (response, statement) pair is labeled 0/1/2 by repeated stochastic
draws; draws are consumed until one value has occurred three times. Over
three categories that takes at least 3 and never more than 7 draws.
"""

import numpy as np

from anscore.featurize import aggregate_first_to_three, mock_label_rule

print("= the labeling scale =")
statement = "pandas eat bamboo shoots"
for response in (
    "I read that pandas eat bamboo shoots every day",
    "there is bamboo and there are shoots in the forest",
    "koalas sleep in eucalyptus trees",
):
    label = mock_label_rule(response, statement)
    print(f"  label {int(label)}  <- {response!r}")

print()
print("= first-to-three on hand-written draw sequences =")
for draws in ([2, 2, 2], [0, 1, 0, 1, 0], [0, 1, 2, 0, 1, 2, 1]):
    label, used = aggregate_first_to_three(draws)
    print(f"  draws {draws} -> label {int(label)} after {used} draws")

print()
print("= draws-used distribution under disagreement =")
rng = np.random.default_rng(0)
counts = {n: 0 for n in range(3, 8)}
for _ in range(20000):
    # draws from a lopsided label distribution, as a noisy labeler produces
    stream = iter(rng.choice([0, 1, 2], size=7, p=[0.6, 0.25, 0.15]).tolist())
    _, used = aggregate_first_to_three(stream)
    counts[used] += 1
for n, c in counts.items():
    bar = "#" * (c // 250)
    print(f"  {n} draws: {c:5d} {bar}")
print("  (3 draws = unanimous; 7 is the pigeonhole maximum)")
