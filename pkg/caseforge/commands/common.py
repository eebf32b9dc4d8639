# caseforge/commands/common.py
"""
Shared plumbing for the sub-commands: the per-run context, case creation,
device session parameters and the stage-order check.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from caseforge.acquisition.session import DeviceSession
from caseforge.core.clock import Clock, system_clock
from caseforge.core.config import Settings
from caseforge.core.errors import StageOrderViolation
from caseforge.repositories.case_repository import CaseRepository
from caseforge.repositories.image_repository import ImageRepository
from caseforge.schemas.report import CaseConfig


@dataclass
class CommandContext:
    settings: Settings
    case_dir: Path
    clock: Clock = system_clock

    def case(self, args: Any) -> CaseConfig:
        """case.json of this case directory, created on first use."""
        repo = CaseRepository(self.case_dir)
        if repo.exists():
            return repo.get()
        return repo.create(CaseConfig(
            case_id=self.case_dir.resolve().name,
            case_dir=self.case_dir,
            host=_pick(args, "host", self.settings.host),
            service_port=_pick(args, "service_port", self.settings.service_port),
            fastboot_port=_pick(args, "fastboot_port", self.settings.fastboot_port),
            tcp_port=self.settings.forward_port,
            created=self.clock(),
        ))

    def session(self, args: Any) -> DeviceSession:
        """Flags win over case.json, which wins over settings."""
        case = self.case(args)
        return DeviceSession(
            host=_pick(args, "host", case.host),
            service_port=_pick(args, "service_port", case.service_port),
            fastboot_port=_pick(args, "fastboot_port", case.fastboot_port),
            timeout=self.settings.connect_timeout,
        )

    def tcp_port(self, args: Any) -> int:
        return _pick(args, "port", self.case(args).tcp_port)


def _pick(args: Any, name: str, default: Any) -> Any:
    value = getattr(args, name, None)
    return default if value is None else value


def require_verified_image(case_dir: Path, offline_image: Optional[Any]) -> None:
    """
    Examination follows collection: at least one verified image must exist
    unless the practitioner names an offline image.

    Raises:
        StageOrderViolation: no verified image and no offline image
    """
    if offline_image:
        return
    if not any(image.verified for image in ImageRepository(case_dir).get_all()):
        raise StageOrderViolation(
            "no verified image in this case yet; run collect first or pass --offline-image"
        )


def emit(data: Any) -> None:
    """Command results go to stdout as JSON."""
    print(json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False))
