"""Integrity-anchored vulnerability analysis pipeline.

Reports from a deterministic analysis engine are canonically serialized,
hashed with SHA-256, and anchored on a write-once ledger (simulated chain
or an EVM contract over JSON-RPC).  Any later modification of a stored
report is detectable by recomputing its digest and comparing against the
anchored value.
"""

__version__ = "0.1.0"
