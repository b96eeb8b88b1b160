"""
Reply similarity and diversity
==============================

Hand-sized examples of the three embedding metrics and corpus-level
distinct-n.
"""
import numpy as np

from kwreply import metrics as M

table = M.EmbeddingTable({
    "good": [1.0, 0.2], "great": [0.9, 0.3], "bad": [-1.0, 0.1],
    "movie": [0.1, 1.0], "film": [0.2, 0.9],
})
cand, ref = ["great", "film"], ["good", "movie", "tonight"]  # "tonight" has no vector and is ignored
print("embedding average", round(M.embedding_average(cand, ref, table), 4))
print("greedy matching  ", round(M.greedy_matching(cand, ref, table), 4))
print("vector extrema   ", round(M.vector_extrema(cand, ref, table), 4))
print("extrema of good/bad:", M.extrema(np.array([table.vectors["good"], table.vectors["bad"]])))
print("no known words ->", M.embedding_average(["tonight"], ref, table))

# distinct-n pools n-grams over the whole corpus
replies = [["a", "b", "a"], ["b", "c"]]
print("distinct-1", M.distinct_n(replies, 1), "distinct-2", M.distinct_n(replies, 2))

report = M.score_corpus([cand, ["tonight"]], [ref, ref], table)
print(report.to_json())
