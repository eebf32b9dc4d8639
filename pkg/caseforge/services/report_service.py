# caseforge/services/report_service.py
"""
Service layer for chain-of-custody accounting and case reports.

This service handles:
- Appending justified, hash-chained entries to the change ledger
- Verifying the chain and replaying its device commands
- Assembling the deterministic case report (report.json + report.md)

Uses LedgerRepository, ImageRepository, FindingsRepository and CaseRepository
for all case-directory access.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

from caseforge import __version__
from caseforge.core.clock import Clock, system_clock
from caseforge.core.errors import CaseError, EmptyCase, MissingJustification
from caseforge.device_sim.device import replay_commands
from caseforge.repositories.case_repository import CaseRepository
from caseforge.repositories.findings_repository import FindingsRepository
from caseforge.repositories.image_repository import ImageRepository
from caseforge.repositories.ledger_repository import GENESIS_HASH, LedgerRepository, canonical_json, entry_hash
from caseforge.schemas.acquisition import AcquiredImage, ChangeLedgerEntry
from caseforge.schemas.device import DeviceProfile
from caseforge.schemas.report import CaseReport, ImageSection
from caseforge.validators.common_validators import validate_justification

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_MD = "report.md"


class ReportService:
    """Service layer for the change ledger and case reports."""

    # ==================== LEDGER ====================

    @staticmethod
    def record_change(
            ledger: LedgerRepository,
            operation: str,
            target: str,
            justification: str = "",
            mutating: bool = False,
            flash_mutating: bool = False,
            device_command: Optional[str] = None,
            detail: str = "",
            clock: Clock = system_clock,
    ) -> ChangeLedgerEntry:
        """
        Append one entry with the next seq, chained to the previous entry.

        Args:
            ledger: Ledger of the current case
            operation: What was done, e.g. "oem unlock"
            target: What it was done to, e.g. "device" or "userdata"
            justification: Why; required when the operation changes device state
            mutating: The operation changed device state
            flash_mutating: The operation changed bytes on flash
            device_command: Fastboot command that reproduces the change
            detail: Free-form response or digest information
            clock: Timestamp source

        Returns:
            ChangeLedgerEntry: The sealed entry as written

        Raises:
            MissingJustification: mutating without a justification
        """
        try:
            validate_justification(justification, mutating)
        except ValueError as e:
            raise MissingJustification(f"{operation}: {e}")

        last = ledger.last()
        unsealed = ChangeLedgerEntry(
            seq=last.seq + 1 if last else 1,
            timestamp=clock(),
            operation=operation,
            target=target,
            justification=justification,
            mutating=mutating,
            flash_mutating=flash_mutating,
            device_command=device_command,
            detail=detail,
            prev_hash=last.record_hash if last else GENESIS_HASH,
        )
        sealed = unsealed.model_copy(update={"record_hash": entry_hash(unsealed)})
        return ledger.append(sealed)

    @staticmethod
    def verify_chain(entries: List[ChangeLedgerEntry]) -> Tuple[bool, List[str]]:
        """
        Check seq order and every hash link.

        Returns:
            (valid, problems) where problems names each broken entry
        """
        problems = []
        previous_hash = GENESIS_HASH
        previous_seq = 0
        for entry in entries:
            if entry.seq <= previous_seq:
                problems.append(f"entry {entry.seq}: seq does not increase after {previous_seq}")
            if entry.prev_hash != previous_hash:
                problems.append(f"entry {entry.seq}: prev_hash does not match the previous record")
            if entry_hash(entry) != entry.record_hash:
                problems.append(f"entry {entry.seq}: record_hash does not match its contents")
            previous_hash = entry.record_hash
            previous_seq = entry.seq
        for problem in problems:
            logger.warning(f"Ledger: {problem}")
        return not problems, problems

    @staticmethod
    def device_commands(entries: Iterable[ChangeLedgerEntry]) -> List[str]:
        return [entry.device_command for entry in entries if entry.device_command]

    @staticmethod
    def replay_ledger(profile: DeviceProfile, entries: Iterable[ChangeLedgerEntry], clock: Clock = system_clock) -> DeviceProfile:
        """Reapply the ledger's device commands to a fresh copy of the initial profile."""
        return replay_commands(profile, ReportService.device_commands(entries), clock)

    # ==================== REPORT ====================

    @staticmethod
    def hash_statement(image: AcquiredImage) -> str:
        source = image.device_path or image.partition
        if image.verified:
            return (
                f"MD5 {image.local_md5} and SHA1 {image.local_sha1} of {image.file_name} match the digests "
                f"taken from the block device {source}."
            )
        return (
            f"MISMATCH: {image.file_name} has MD5 {image.local_md5} / SHA1 {image.local_sha1}, the block device "
            f"{source} reported MD5 {image.device_md5} / SHA1 {image.device_sha1}."
        )

    @staticmethod
    def build_report(case_dir: Path) -> CaseReport:
        """
        Assemble the report from the case directory alone.

        Raises:
            EmptyCase: no ledger or no acquired image
        """
        ledger = LedgerRepository(case_dir).get_all()
        images = ImageRepository(case_dir).get_all()
        if not ledger:
            raise EmptyCase(f"{case_dir} has no ledger entries")
        if not images:
            raise EmptyCase(f"{case_dir} has no acquired images")

        cases = CaseRepository(case_dir)
        try:
            case_id = cases.get().case_id
        except CaseError:
            case_id = Path(case_dir).resolve().name

        warnings = []
        sections = []
        for image in images:
            if not image.verified:
                message = f"UnverifiedImage: {image.file_name} failed hash verification"
                logger.warning(message)
                warnings.append(message)
            sections.append(ImageSection(
                image=image,
                hash_statement=ReportService.hash_statement(image),
                unverified=not image.verified,
            ))

        chain_valid, problems = ReportService.verify_chain(ledger)
        warnings.extend(f"LedgerTampered: {problem}" for problem in problems)

        return CaseReport(
            case_id=case_id,
            created=max(entry.timestamp for entry in ledger),
            tool_version=__version__,
            device=cases.get_device(),
            images=sections,
            ledger=ledger,
            ledger_chain_valid=chain_valid,
            findings=FindingsRepository(case_dir).get_all(),
            annotations=cases.get_annotations(),
            warnings=warnings,
        )

    @staticmethod
    def render_json(report: CaseReport) -> str:
        return canonical_json(report.model_dump(mode="json")) + "\n"

    @staticmethod
    def render_markdown(report: CaseReport) -> str:
        lines = [f"# Case report: {report.case_id}", ""]
        lines.append(f"- Generated by caseforge {report.tool_version}")
        lines.append(f"- Last recorded activity: {report.created} (unix seconds)")
        lines.append(f"- Ledger chain: {'intact' if report.ledger_chain_valid else 'BROKEN'}")
        lines.append("")

        unverified = [s for s in report.images if s.unverified]
        if unverified:
            lines += ["## UNVERIFIED IMAGES", ""]
            for section in unverified:
                lines.append(f"> **UNVERIFIED** {section.image.file_name}: {section.hash_statement}")
            lines.append("")

        if report.device:
            device = report.device
            lines += ["## Device", ""]
            lines.append(f"- Model: {device.model}")
            lines.append(f"- Android version: {device.android_version}")
            lines.append(f"- Bootloader: {device.bootloader_state}")
            lines.append(f"- Encryption suspected: {'yes' if device.encryption_suspected else 'no'}")
            lines.append(f"- Screen lock: {'yes' if device.screen_lock else 'no'}")
            lines.append("")

        lines += ["## Images", ""]
        lines.append("| Image | Size | Local MD5 | Device MD5 | Local SHA1 | Device SHA1 | Verified |")
        lines.append("|---|---|---|---|---|---|---|")
        for section in report.images:
            image = section.image
            lines.append(
                f"| {image.file_name} | {image.size} | {image.local_md5} | {image.device_md5} | "
                f"{image.local_sha1} | {image.device_sha1} | {'yes' if image.verified else 'NO'} |"
            )
        lines.append("")
        for section in report.images:
            flag = " (ciphertext)" if section.image.ciphertext else ""
            lines.append(f"- {section.hash_statement}{flag}")
        lines.append("")

        lines += ["## Changes made to the evidence item", ""]
        mutating = report.mutating_entries
        if not mutating:
            lines.append("No operation changed device state.")
        for entry in mutating:
            flash = " Flash contents changed." if entry.flash_mutating else ""
            lines.append(f"- #{entry.seq} `{entry.operation}` on {entry.target}: {entry.justification}.{flash}")
        lines.append("")

        lines += ["## Ledger", ""]
        lines.append("| Seq | Time | Operation | Target | Mutating | Justification |")
        lines.append("|---|---|---|---|---|---|")
        for entry in report.ledger:
            lines.append(
                f"| {entry.seq} | {entry.timestamp} | {entry.operation} | {entry.target} | "
                f"{'yes' if entry.mutating else 'no'} | {entry.justification} |"
            )
        lines.append("")

        if report.findings:
            lines += ["## Findings", ""]
            for name in sorted(report.findings):
                lines.append(f"- {name}: see findings/{name}.json")
            lines.append("")

        if report.annotations:
            lines += ["## Annotations", ""]
            for key in sorted(report.annotations):
                lines.append(f"- {key}: {json.dumps(report.annotations[key], sort_keys=True)}")
            lines.append("")

        if report.warnings:
            lines += ["## Warnings", ""]
            lines += [f"- {warning}" for warning in report.warnings]
            lines.append("")
        return "\n".join(lines)

    @staticmethod
    def generate_report(case_dir: Path) -> Tuple[CaseReport, Path, Path]:
        """
        Build and write report.json and report.md.

        Returns:
            (report, path of report.json, path of report.md)
        """
        case_dir = Path(case_dir)
        report = ReportService.build_report(case_dir)
        json_path = case_dir / REPORT_JSON
        md_path = case_dir / REPORT_MD
        json_path.write_text(ReportService.render_json(report), encoding="utf-8")
        md_path.write_text(ReportService.render_markdown(report), encoding="utf-8")
        logger.info(f"Wrote {REPORT_JSON} and {REPORT_MD} ({len(report.images)} images, {len(report.ledger)} entries)")
        return report, json_path, md_path
