"""zerebro: a desk-scale autonomous memetic agent.

Hash-embedded RAG memory, an autonomous action loop over simulated social
and chain connectors, the recursive self-dialogue (backrooms) experiment,
and a quantitative model-collapse lab with entropy-injection mitigation.
"""

__version__ = "0.1.0"
