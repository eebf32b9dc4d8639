# caseforge/repositories/case_repository.py
"""
Case Repository

case.json (written once), device.json (latest identification),
annotations.json (practitioner supplied) and the .lock file that keeps one
CLI process per case directory.
"""

import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

from pydantic import ValidationError

from caseforge.core.errors import CaseError, CaseLocked
from caseforge.schemas.acquisition import DeviceIdentity
from caseforge.schemas.report import CaseConfig

logger = logging.getLogger(__name__)

CASE_FILE = "case.json"
DEVICE_FILE = "device.json"
ANNOTATIONS_FILE = "annotations.json"
LOCK_FILE = ".lock"


class CaseRepository:

    def __init__(self, case_dir: Path):
        self.case_dir = Path(case_dir)

    def exists(self) -> bool:
        return (self.case_dir / CASE_FILE).exists()

    def create(self, config: CaseConfig) -> CaseConfig:
        """Create the case directory and case.json; an existing case is left as it is."""
        self.case_dir.mkdir(parents=True, exist_ok=True)
        path = self.case_dir / CASE_FILE
        try:
            with path.open("x", encoding="utf-8") as handle:
                json.dump(config.model_dump(mode="json", exclude={"case_dir"}), handle, sort_keys=True, indent=2)
                handle.write("\n")
        except FileExistsError:
            return self.get()
        logger.info(f"Created case '{config.case_id}' in {self.case_dir}")
        return config

    def get(self) -> CaseConfig:
        path = self.case_dir / CASE_FILE
        if not path.exists():
            raise CaseError(f"{self.case_dir} is not a case directory (no {CASE_FILE})")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            return CaseConfig(case_dir=self.case_dir, **data)
        except (ValueError, ValidationError) as e:
            raise CaseError(f"{CASE_FILE} is invalid: {e}")

    def save_device(self, identity: DeviceIdentity) -> None:
        path = self.case_dir / DEVICE_FILE
        path.write_text(json.dumps(identity.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def get_device(self) -> Optional[DeviceIdentity]:
        path = self.case_dir / DEVICE_FILE
        if not path.exists():
            return None
        return DeviceIdentity.model_validate_json(path.read_text(encoding="utf-8"))

    def get_annotations(self) -> Dict[str, Any]:
        path = self.case_dir / ANNOTATIONS_FILE
        if not path.exists():
            return {}
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as e:
            raise CaseError(f"{ANNOTATIONS_FILE} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise CaseError(f"{ANNOTATIONS_FILE} must hold a JSON object")
        return data

    @contextmanager
    def lock(self) -> Iterator[None]:
        """
        Hold the case lock for the duration of one command.

        Raises:
            CaseLocked: another process holds the lock
        """
        self.case_dir.mkdir(parents=True, exist_ok=True)
        path = self.case_dir / LOCK_FILE
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CaseLocked(f"{self.case_dir} is in use by another process (remove {LOCK_FILE} if stale)")
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield
        finally:
            path.unlink(missing_ok=True)
