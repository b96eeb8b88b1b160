"""
Keyword marking and the template corpus
=======================================

Dictionaries with the overlap rule, rarest-keyword marking, reversal of
backward replies, and a seeded split.
"""
from kwreply import corpus as C

# a word in both dictionaries stays an emotion word
ed, td = C.load_dictionaries({"joy": "Happy", "furious": "Angry"}, {"joy": 3, "tax": 3, "levy": 0})
print("topic words:", td.words())

freq = {"tax": 500, "levy": 3}
pair = C.ConversationPair(("what", "happened"), ("the", "tax", "and", "levy", "made", "me", "furious"))
m = C.mark_pair(pair, ed, td, freq)
print("topic keyword:", m.topic_keyword, "at", m.topic_index)  # levy, the rarer one
print("segments:", m.left, "|", m.middle, "|", m.right, "|", m.direction)

# the emotion keyword comes first here, so segments are read on the reversed reply
m = C.mark_pair(C.ConversationPair(("why",), ("so", "furious", "about", "the", "tax")), ed, td, freq)
print("backward segments:", m.left, "|", m.middle, "|", m.right)
print("reassembled:", " ".join(m.reassemble()))

# template corpus: every reply holds one planted keyword of each type
sc = C.synth_corpus(seed=0, n_pairs=1000)
ed, td = sc.dictionaries()
for p in sc.pairs[:4]:
    print(" ".join(p.post), "->", " ".join(p.reply))

split = C.filter_and_split(sc.pairs, ed, td, seed=0, val_size=50, test_size=100)
print(split.stats)
