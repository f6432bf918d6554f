"""Topic-model paper ranking engine.

Learns abstract topics from a paper corpus with online variational-Bayes
LDA, represents papers and users as topic-weight vectors, and sorts new
releases per user by scalar product.
"""

__version__ = "0.1.0"
