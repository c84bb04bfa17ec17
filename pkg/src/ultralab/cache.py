"""Write-once ``.npz`` cache with a hashed JSON header.

Each entry stores its arrays plus a ``__header__`` JSON string holding the
metadata and a sha256 over the array bytes. Writes go to a temporary file
that is renamed into place, so readers never see a partial entry.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import CacheCorrupt

ENV_VAR = "ULTRALAB_CACHE"
_HEADER = "__header__"


def default_dir(cli_value: Optional[str] = None) -> Optional[Path]:
    """``--cache-dir`` wins over the environment; ``None`` disables caching."""
    value = cli_value or os.environ.get(ENV_VAR)
    return Path(value) if value else None


def digest(arrays: Dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        h.update(name.encode())
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def key_name(**parts) -> str:
    """Stable file stem from keyword parts."""
    text = json.dumps(parts, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:24]


@dataclass
class Cache:
    root: Path
    hits: int = 0
    misses: int = 0

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def write(self, key: str, arrays: Dict[str, np.ndarray], meta: dict) -> Path:
        header = dict(meta, sha256=digest(arrays))
        buf = io.BytesIO()
        np.savez(buf, **arrays, **{_HEADER: np.array(json.dumps(header, sort_keys=True))})
        target = self.path(key)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(buf.getvalue())
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target

    def read(self, key: str):
        """``(arrays, meta)`` or ``None`` when absent.

        Raises
        ------
        CacheCorrupt
            If the file is unreadable or its hash does not match.
        """
        p = self.path(key)
        if not p.exists():
            self.misses += 1
            return None
        arrays, meta = load_entry(p)
        self.hits += 1
        return arrays, meta


def load_entry(p: Path):
    try:
        with np.load(p, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files if k != _HEADER}
            meta = json.loads(str(z[_HEADER]))
    except Exception as exc:  # noqa: BLE001 - any decode failure means corruption
        raise CacheCorrupt(f"{p}: unreadable ({exc})") from exc
    if meta.get("sha256") != digest(arrays):
        raise CacheCorrupt(f"{p}: hash mismatch")
    return arrays, meta


@dataclass
class GCSummary:
    removed: List[str] = field(default_factory=list)
    reclaimed_bytes: int = 0
    kept: int = 0

    def to_dict(self):
        return {"removed": self.removed, "reclaimed_bytes": self.reclaimed_bytes, "kept": self.kept}


def cache_gc(directory) -> GCSummary:
    """Delete entries whose header hash does not match their content."""
    summary = GCSummary()
    root = Path(directory)
    for p in sorted(root.glob("*.npz")):
        try:
            load_entry(p)
            summary.kept += 1
        except CacheCorrupt:
            summary.reclaimed_bytes += p.stat().st_size
            summary.removed.append(p.name)
            p.unlink()
    return summary
