"""Deterministic embeddings: the offline oracle behind every metric.

Every safety metric in the harness (consistency, drift, conflict rate)
reduces to cosine geometry over embeddings. Offline runs use a signed
feature-hashing embedder, so the same text always maps to the same
unit vector, on any machine, with no model download.
"""

from gmas_harness import DeterministicEmbedder, cosine, cross_run_distance

embedder = DeterministicEmbedder(dim=384)

a = embedder.embed("allocate 10 prb to slice s1")
b = embedder.embed("allocate 10 prb to slice s1")
c = embedder.embed("force handover of every user in cell c3")

print("same text, same vector:", (a.values == b.values).all())
print("norm of a nonzero embedding:", a.norm)
print("cosine(self):            %.4f" % cosine(a, b))
print("cosine(unrelated text):  %.4f" % cosine(a, c))

# Drift is 1 - cosine between consecutive run outputs of one agent.
outputs = [
    "allocate 10 prb to s1 and admit it",
    "allocate 12 prb to s1 and admit it",
    "reject s1 and reallocate its budget to s2",
]
print("\nconsecutive drift over three runs:")
for i, d in enumerate(cross_run_distance(outputs, embedder), start=1):
    print(f"  run{i} -> run{i + 1}: {d:.4f}")

# Empty text is legal and embeds to the zero vector.
print("\nempty text embeds to zero vector:", embedder.embed("").is_zero())
