"""Loading of the editable data files (platform patterns, suffix table,
column map, log profiles).

Every loader takes an optional override directory; a file found there wins
over the copy bundled with the package.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional

DATA_DIR = Path(__file__).resolve().parent / "data"


def _locate(name: str, override: Optional[Path]) -> Path:
    if override is not None:
        candidate = Path(override) / name
        if candidate.is_file():
            return candidate
    return DATA_DIR / name


def load_json(name: str, override: Optional[Path] = None):
    with open(_locate(name, override), "r", encoding="utf-8") as f:
        return json.load(f)


def platforms(override: Optional[Path] = None) -> Dict[str, List[str]]:
    return load_json("platforms.json", override)


def suffix_releases(override: Optional[Path] = None) -> Dict[str, Dict[str, List[str]]]:
    raw = load_json("suffix_releases.json", override)
    out: Dict[str, Dict[str, List[str]]] = {}
    for role, table in raw.items():
        out[role] = {k: ([v] if isinstance(v, str) else list(v)) for k, v in table.items()}
    return out


def column_map(override: Optional[Path] = None) -> dict:
    return load_json("column_map.json", override)


def log_profiles(override: Optional[Path] = None) -> Dict[str, dict]:
    """All log profiles keyed by name; profiles in *override*/log_profiles replace bundled ones."""
    found: Dict[str, dict] = {}
    dirs = [DATA_DIR / "log_profiles"]
    if override is not None:
        dirs.append(Path(override) / "log_profiles")
    for d in dirs:
        if not d.is_dir():
            continue
        for path in sorted(d.glob("*.json")):
            with open(path, "r", encoding="utf-8") as f:
                prof = json.load(f)
            found[prof.get("name", path.stem)] = prof
    return found
