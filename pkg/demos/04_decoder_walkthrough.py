"""
Growing a reply outward from two keywords
=========================================

One decode with random weights, stage by stage: emotion-side draft,
attended middle, then the two outer sides.
"""
import numpy as np

from kwreply.decoder import decode, init_decoder
from kwreply.encoder import encode, init_encoder
from kwreply.numcore import Graph, ParamStore
from kwreply.selector import assemble, init_selector, select_direction

V, E, H, A = 20, 8, 8, 6
W_TP, W_ET = 10, 11
rng = np.random.default_rng(2)
store = ParamStore()
init_encoder(store, rng, V, E, H)
init_decoder(store, rng, V, E, H, A)
init_selector(store, rng, V, E, H)
for k in store:
    store[k][...] = rng.normal(size=store[k].shape)

g = Graph(store)
enc = encode(g, [4, 5, 6, 7])
print("post context:", np.round(enc.context.value, 3))

d = decode(g, enc, W_TP, W_ET, max_middle_len=5, max_side_len=4)
print("stage 1 draft (right to left, discarded):", d.draft.tokens, "states:", d.draft.length)
print("stage 2 middle:", d.middle.tokens)
for j, row in enumerate(d.middle.attention):
    print(f"  step {j} attention", np.round(row.weights, 3), "sum", round(float(row.weights.sum()), 6))
print("stage 3 left:", d.sides.left, "right:", d.sides.right)

y_f, y_b = assemble(d.sides.left, W_TP, d.middle.tokens, W_ET, d.sides.right)
verdict = select_direction(store, y_f, y_b)
print("forward:", y_f)
print("selector score", round(verdict.score, 3), "->", verdict.chosen, verdict.tokens)
