"""
Topic model by collapsed Gibbs sampling
=======================================

A two-topic corpus that should separate cleanly, then topic inference
and dictionary extraction.
"""
import numpy as np

from kwreply import lda

rng = np.random.default_rng(0)
A = [f"a{i}" for i in range(10)]
B = [f"b{i}" for i in range(10)]
docs = [list(rng.choice(A if d % 2 == 0 else B, size=20)) for d in range(40)]

trace = []
model = lda.gibbs_train(docs, K=2, alpha=0.1, iterations=200, seed=0,
                        callback=lambda m, it: trace.append(lda.log_likelihood(m)) if it % 50 == 0 else None)
model.check_counts()
print("log-likelihood every 50 sweeps:", [round(x, 1) for x in trace])
print("purity of A and B:", lda.topic_purity(model, [set(A), set(B)]))

# fold-in inference for unseen documents
for post in (["a1", "a4", "a4"], ["b7", "b2"], ["nothing", "known"]):
    k, dist = lda.infer_topic(model, post, seed=0)
    print(post, "-> topic", k, np.round(dist, 3))

# top words per topic; the 5-word lists come out disjoint
td = lda.extract_topic_dictionary(model, per_topic=5, high_freq_fraction=0)
print(td.lists, "truncated:", td.truncated)

# conditional used by the sampler for one token, with that token removed from the counts
print("p(z | rest) for doc 0 token 0:", np.round(model.conditional(0, 0), 4))
