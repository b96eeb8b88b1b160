"""
Train on the template corpus and answer posts
=============================================

Classifier, joint generator and direction selector trained on 50 pairs,
then generation with a full trace and a checkpoint round trip.
"""
import io
import json
import tempfile
from pathlib import Path

from kwreply.pipeline import Model, chat, evaluate, joint_token_loss, synthetic_model, train_model

model, marked = synthetic_model(seed=0, n_pairs=50)
print("vocabulary", len(model.vocab), "pairs", len(marked))

history = train_model(model, marked, epochs=40)
joint = [h for h in history if h["stage"] == "joint"]
print("token loss: untrained", round(joint[0]["token_loss"], 3), "after", round(joint[-1]["token_loss"], 5))
print("teacher-forced token loss now", joint_token_loss(model, marked))

hits = sum(model.generate(list(m.pair.post)).reply == list(m.pair.reply) for m in marked)
print(f"regenerated {hits}/{len(marked)} training replies exactly")

res = model.generate(list(marked[1].pair.post))
print(" ".join(marked[1].pair.post), "->", " ".join(res.reply))
cat = res.trace["categories"]
print("emotion", cat["emotion"], "topic", cat["topic"])
print(json.dumps({k: res.trace[k] for k in ("keywords", "segments", "direction")}))

# scores against the references with the model's own embeddings
print(evaluate(model, marked[:10]).to_json())

with tempfile.TemporaryDirectory() as tmp:
    model.save(Path(tmp) / "ck.bin")
    back = Model.load(Path(tmp) / "ck.bin")
print("reloaded checkpoint agrees:", back.generate(list(marked[3].pair.post)).reply == model.generate(list(marked[3].pair.post)).reply)

out = io.StringIO()
chat(back, io.StringIO(" ".join(marked[5].pair.post) + "\n"), out, trace=True, prompt=None)
print(out.getvalue())
