# caseforge/repositories/findings_repository.py
"""
Findings Repository

Derived examination output under findings/. Unlike images these are
regenerated freely; JSON is written canonically so reruns are byte-identical.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

FINDINGS_DIR = "findings"


class FindingsRepository:

    def __init__(self, case_dir: Path):
        self.root = Path(case_dir) / FINDINGS_DIR

    def path(self, name: str) -> Path:
        return self.root / name

    def save_json(self, name: str, data: Any) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(f"{name}.json")
        path.write_text(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        logger.info(f"Wrote {FINDINGS_DIR}/{path.name}")
        return path

    def save_text(self, file_name: str, text: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path(file_name)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {FINDINGS_DIR}/{file_name}")
        return path

    def get_json(self, name: str) -> Optional[Any]:
        path = self.path(f"{name}.json")
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def get_all(self) -> Dict[str, Any]:
        """name -> decoded JSON for every findings file, in name order."""
        if not self.root.exists():
            return {}
        return {p.stem: json.loads(p.read_text(encoding="utf-8")) for p in sorted(self.root.glob("*.json"))}
