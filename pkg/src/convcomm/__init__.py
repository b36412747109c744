"""convcomm: utterance embedding learning and overlapping community detection.

Trains a self-attentive contextual utterance encoder with siamese or
triplet energy objectives, clusters the learned embeddings with fuzzy
c-means, and scores the result with ranking metrics and the Omega
index.
"""

__version__ = "0.1.0"
