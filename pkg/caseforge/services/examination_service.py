# caseforge/services/examination_service.py
"""
Service layer for the examination stage.

This service handles:
- Loading acquired images as snapshot archives (never ciphertext)
- Decoding every shared_prefs file and SQLite database in an image
- Extracting accounts.db, listing apps, typing files, keyword search
- Writing each result set under findings/

Uses ImageRepository for evidence reads and FindingsRepository for output.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from caseforge.artifacts.classify import annotate_prefs, annotate_table
from caseforge.artifacts.shared_prefs import parse_shared_prefs, prefs_to_json
from caseforge.artifacts.sqlite_reader import sqlite_read
from caseforge.core.errors import ArtifactError, CiphertextImage, EvidenceError, MissingAccountsTable, NotFound
from caseforge.device_sim.profiles import ACCOUNTS_DB_PATH
from caseforge.evidence.archive import parse_archive, read_file
from caseforge.evidence.search import identify_file_type, keyword_search
from caseforge.repositories.findings_repository import FindingsRepository
from caseforge.repositories.image_repository import ImageRepository
from caseforge.schemas.accounts import AccountsExtraction
from caseforge.schemas.apps import AppScanResult
from caseforge.schemas.artifacts import Cell, SqliteTable
from caseforge.schemas.evidence import FileKind, SearchHit, SnapshotArchive
from caseforge.services.accounts_service import AccountsService
from caseforge.services.app_scan_service import AppScanService

logger = logging.getLogger(__name__)

SHARED_PREFS_DIR = "/shared_prefs/"


def cell_to_json(cell: Cell) -> Any:
    if isinstance(cell, bytes):
        return {"blob": cell.hex()}
    return cell


def table_to_json(table: SqliteTable) -> Dict[str, Any]:
    return {
        "name": table.name,
        "columns": table.columns,
        "rowids": table.rowids,
        "rows": [[cell_to_json(cell) for cell in row] for row in table.rows],
        "annotations": [a.model_dump(exclude_none=True) for a in annotate_table(table)],
    }


class ExaminationService:
    """Service layer for decoding acquired images into findings."""

    # ==================== IMAGES ====================

    @staticmethod
    def image_bytes(case_dir: Path, partition: str = "userdata", offline_image: Optional[Path] = None) -> bytes:
        """
        Raw bytes of an acquired image, or of an offline image file.

        Raises:
            NotFound: no such image in the case
            CiphertextImage: the image was acquired from an encrypted partition
        """
        if offline_image is not None:
            return Path(offline_image).read_bytes()
        images = ImageRepository(case_dir)
        if images.meta_path(partition).exists():
            meta = images.get_meta(partition)
            if meta.ciphertext:
                raise CiphertextImage(
                    f"{meta.file_name} was acquired from an encrypted partition; "
                    "fall back to logical acquisition"
                )
        return images.read_bytes(partition)

    @staticmethod
    def load_archive(case_dir: Path, partition: str = "userdata", offline_image: Optional[Path] = None) -> SnapshotArchive:
        archive = parse_archive(ExaminationService.image_bytes(case_dir, partition, offline_image))
        for warning in archive.warnings:
            logger.warning(f"{partition}: {warning}")
        return archive

    @staticmethod
    def _optional_archive(case_dir: Path, partition: str, warnings: List[str]) -> Optional[SnapshotArchive]:
        if not ImageRepository(case_dir).image_path(partition).exists():
            return None
        try:
            return ExaminationService.load_archive(case_dir, partition)
        except EvidenceError as e:
            message = f"{partition}.img not used: {e.detail}"
            logger.warning(message)
            warnings.append(message)
            return None

    # ==================== APPS ====================

    @staticmethod
    def examine_apps(case_dir: Path, offline_image: Optional[Path] = None) -> AppScanResult:
        """
        App enumeration over userdata, with system.img and sdcard.img used
        when the case holds them. Writes findings/apps.json.
        """
        warnings: List[str] = []
        userdata = ExaminationService.load_archive(case_dir, offline_image=offline_image)
        system = sdcard = None
        if offline_image is None:
            system = ExaminationService._optional_archive(case_dir, "system", warnings)
            sdcard = ExaminationService._optional_archive(case_dir, "sdcard", warnings)
        result = AppScanService.enumerate_packages(userdata, system, sdcard)
        result.warnings[:0] = warnings
        FindingsRepository(case_dir).save_json("apps", result.model_dump(mode="json"))
        return result

    # ==================== PREFS / DATABASES ====================

    @staticmethod
    def examine_prefs(case_dir: Path, offline_image: Optional[Path] = None) -> List[Dict[str, Any]]:
        """
        Decode every */shared_prefs/*.xml file. A file that fails to parse is
        reported with its error and does not stop the others.
        """
        archive = ExaminationService.load_archive(case_dir, offline_image=offline_image)
        reports = []
        for entry in archive.entries:
            if entry.is_dir or SHARED_PREFS_DIR not in f"/{entry.path}" or not entry.path.endswith(".xml"):
                continue
            try:
                document = parse_shared_prefs(entry.data)
            except ArtifactError as e:
                logger.warning(f"{entry.path}: {e.detail}")
                reports.append({"path": entry.path, "format": "shared_prefs", "error": e.detail})
                continue
            reports.append({
                "path": entry.path,
                "format": "shared_prefs",
                "entries": prefs_to_json(document),
                "annotations": [a.model_dump(exclude_none=True) for a in annotate_prefs(document)],
                "warnings": document.warnings,
            })
        FindingsRepository(case_dir).save_json("prefs", reports)
        logger.info(f"Decoded {len(reports)} shared_prefs files")
        return reports

    @staticmethod
    def examine_databases(case_dir: Path, offline_image: Optional[Path] = None) -> List[Dict[str, Any]]:
        """Read every file whose header identifies it as SQLite."""
        archive = ExaminationService.load_archive(case_dir, offline_image=offline_image)
        reports = []
        for entry in archive.entries:
            if entry.is_dir or identify_file_type(entry.data[:64]) is not FileKind.SQLITE:
                continue
            try:
                tables = sqlite_read(entry.data)
            except ArtifactError as e:
                logger.warning(f"{entry.path}: {e.detail}")
                reports.append({"path": entry.path, "format": "sqlite", "error": f"{type(e).__name__}: {e.detail}"})
                continue
            reports.append({"path": entry.path, "format": "sqlite", "tables": [table_to_json(t) for t in tables]})
        FindingsRepository(case_dir).save_json("databases", reports)
        logger.info(f"Read {len(reports)} SQLite databases")
        return reports

    @staticmethod
    def examine_files(case_dir: Path, offline_image: Optional[Path] = None) -> List[Dict[str, Any]]:
        """Header-based type of every file in the image."""
        archive = ExaminationService.load_archive(case_dir, offline_image=offline_image)
        listing = [
            {"path": e.path, "size": e.size, "type": identify_file_type(e.data[:64]).value}
            for e in archive.entries if not e.is_dir
        ]
        FindingsRepository(case_dir).save_json("files", listing)
        return listing

    # ==================== ACCOUNTS ====================

    @staticmethod
    def examine_accounts(case_dir: Path, offline_image: Optional[Path] = None) -> AccountsExtraction:
        """
        Join accounts.db from the userdata image.

        Raises:
            MissingAccountsTable: accounts.db absent or without an accounts table
        """
        archive = ExaminationService.load_archive(case_dir, offline_image=offline_image)
        try:
            data = read_file(archive, ACCOUNTS_DB_PATH)
        except NotFound:
            raise MissingAccountsTable(f"image has no {ACCOUNTS_DB_PATH}")
        extraction = AccountsService.extract_accounts(sqlite_read(data), ACCOUNTS_DB_PATH)
        FindingsRepository(case_dir).save_json("accounts", extraction.model_dump(mode="json"))
        return extraction

    # ==================== SEARCH ====================

    @staticmethod
    def search(
            case_dir: Path,
            patterns: Sequence[str],
            partition: str = "userdata",
            offline_image: Optional[Path] = None,
    ) -> List[SearchHit]:
        """
        Keyword / signature search over the raw image, slack included.
        Hits go to findings/search-<partition>.jsonl, one JSON object per line.
        """
        hits = keyword_search(ExaminationService.image_bytes(case_dir, partition, offline_image), list(patterns))
        lines = [
            json.dumps(hit.model_dump(mode="json", exclude_none=True), sort_keys=True, separators=(",", ":"))
            for hit in hits
        ]
        findings = FindingsRepository(case_dir)
        findings.save_text(f"search-{partition}.jsonl", "".join(line + "\n" for line in lines))
        findings.save_json(f"search-{partition}", [hit.model_dump(mode="json", exclude_none=True) for hit in hits])
        return hits
