"""Cross-source author identity resolution.

Decides whether a university registry record and a bibliographic author
profile denote the same person, using citation-overlap screening, label
spreading over co-authorship graphs, a language-model judge, and a two-stage
escalation pipeline that combines them.
"""

__version__ = "0.1.0"
