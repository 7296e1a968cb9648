"""Coffee-leaf disease diagnosis assistant.

Detection geometry and evaluation metrics, knowledge-base ingestion and
retrieval, grounded chat with windowed memory, and the HTTP service that ties
them together.
"""

__version__ = "0.1.0"
