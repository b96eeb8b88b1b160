"""
Tape autodiff, gradient checks and Adam
=======================================

A GRU cell feeding a masked softmax, differentiated by the tape and
checked against central differences.
"""
import numpy as np

from kwreply import numcore as nc
from kwreply.numcore import Graph, ParamStore

rng = np.random.default_rng(0)
H, E, V = 4, 3, 6

# parameters live in a named store
store = ParamStore({
    "x": rng.normal(size=E),
    "gru.W": rng.normal(size=(3 * H, E)) * 0.5,
    "gru.U": rng.normal(size=(3 * H, H)) * 0.5,
    "gru.b": np.zeros(3 * H),
    "out.W": rng.normal(size=(V, H)),
})
mask = np.array([False, True, True, True, True, True])  # id 0 is never predicted


def loss_of(g):
    h = g.gru(g.p("x"), g.const(np.zeros(H)), g.p("gru.W"), g.p("gru.U"), g.p("gru.b"))
    return g.softmax_xent(g.linear(g.p("out.W"), h), 3, mask)


g = Graph(store)
loss = loss_of(g)
grads = g.backward(loss)
print("loss", float(loss.value))
print("probabilities", np.round(loss.aux["probs"], 3))

# central differences need float64 to be meaningful
with nc.precision(np.float64):
    s64 = store.copy(np.float64)
    g64 = Graph(s64)
    analytic = g64.backward(loss_of(g64))
    numeric = nc.finite_difference(lambda p: float(loss_of(Graph(p)).value), s64, s64.names(), 1e-5)
for name in s64:
    print(f"{name:6s} relative error {nc.relative_error(analytic[name], numeric[name]):.1e}")

# a few Adam steps push the target probability up
opt = nc.Adam(store.names(), lr=0.05)
for step in range(30):
    g = Graph(store)
    loss = loss_of(g)
    opt.step(store, g.backward(loss))
print("after 30 Adam steps, loss", round(float(loss.value), 4))

# bit-exact persistence
blob = nc.dumps_container(store.entries, {"note": "demo"})
back, meta = nc.loads_container(blob)
print("round trip identical:", all(back[k].tobytes() == store[k].tobytes() for k in store), meta)
