"""Small shared helpers: seeding, hashing, number formatting."""

import hashlib
from pathlib import Path


def stage_seed(seed: int, label: str) -> int:
    """Derive an independent 63-bit seed for a named stage from the global seed."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def tree_hashes(root) -> dict[str, str]:
    root = Path(root)
    return {
        str(p.relative_to(root)): file_hash(p)
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in ("manifest.tsv", ".lock")
    }


def fmt9(x: float) -> str:
    """Nine significant digits; parsing the string back and reformatting is stable."""
    return f"{x:.9g}"
