"""Keyword-conditioned emotional reply generation.

A post is mapped to one emotion keyword and one topic keyword, the reply is
grown outward from both keywords by a three-stage recurrent decoder, and a
small classifier decides which way round the assembled reply reads.
"""
from .corpus import ConversationPair, MarkedPair, Vocab, mark_pair, synth_corpus
from .pipeline import Config, Model, evaluate, train_model

__all__ = ["Config", "ConversationPair", "MarkedPair", "Model", "Vocab", "evaluate", "mark_pair",
           "synth_corpus", "train_model"]
__version__ = "0.1.0"
