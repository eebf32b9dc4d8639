# caseforge/services/app_scan_service.py
"""
Service layer for locating installed apps and their storage.

This service handles:
- Listing package directories under data/ of a userdata archive
- Pairing external-storage app directories with private ones
- Finding user and system APKs

Package-name grammar comes from the common validators; junk directories
are warned about and skipped.
"""

import logging
import re
from typing import List, Optional, Set, Tuple

from caseforge.core.errors import NoDataDirectory
from caseforge.evidence.archive import directories, list_dir
from caseforge.schemas.apps import CATEGORIES, ApkOrigin, ApkRecord, AppRecord, AppScanResult, ExternalStorageRecord
from caseforge.schemas.evidence import SnapshotArchive
from caseforge.validators.common_validators import validate_package_name

logger = logging.getLogger(__name__)

DATA_ROOT = "data"
USER_APK_ROOT = "data/app"
SYSTEM_APK_ROOT = "system/app"
EMULATED_EXTERNAL_ROOT = "data/media/0"
EXTERNAL_APP_DATA = "Android/data"

# data/ children that belong to the OS rather than to one package.
_RESERVED_DATA_DIRS = {"app", "media"}
_CATEGORY_ALIASES = {"app_webview": "webview"}
_VERSION_SUFFIX_RE = re.compile(r"-\d+$")


def _category(name: str) -> str:
    name = _CATEGORY_ALIASES.get(name, name)
    return name if name in CATEGORIES else "other"


def apk_package(file_name: str) -> str:
    """data/app/<pkg>-N.apk -> <pkg>"""
    stem = file_name[:-len(".apk")] if file_name.endswith(".apk") else file_name
    return _VERSION_SUFFIX_RE.sub("", stem)


def _apk_files(archive: Optional[SnapshotArchive], root: str) -> List[str]:
    if archive is None:
        return []
    prefix = root + "/"
    return sorted(
        e.path for e in archive.entries
        if not e.is_dir and e.path.startswith(prefix) and "/" not in e.path[len(prefix):] and e.path.endswith(".apk")
    )


class AppScanService:
    """Service layer for app enumeration over parsed archives."""

    @staticmethod
    def package_dirs(archive: SnapshotArchive, warnings: List[str]) -> List[str]:
        """
        Valid package names under data/.

        Raises:
            NoDataDirectory: the archive has no data/ directory
        """
        if DATA_ROOT not in directories(archive):
            raise NoDataDirectory(f"archive has no '{DATA_ROOT}' directory; is this a userdata image?")
        known = directories(archive)
        packages = []
        for name in list_dir(archive, DATA_ROOT):
            if name in _RESERVED_DATA_DIRS or f"{DATA_ROOT}/{name}" not in known:
                continue
            try:
                packages.append(validate_package_name(name))
            except ValueError as e:
                message = f"skipped {DATA_ROOT}/{name}: {e}"
                logger.warning(message)
                warnings.append(message)
        return packages

    @staticmethod
    def collect_apks(userdata: SnapshotArchive, system: Optional[SnapshotArchive] = None) -> List[ApkRecord]:
        """
        Every .apk under data/app (user) and system/app (system).

        Returns:
            List[ApkRecord]: user APKs first, each group in path order
        """
        records = [
            ApkRecord(package=apk_package(path.rsplit("/", 1)[1]), apk_path=path, origin=ApkOrigin.USER)
            for path in _apk_files(userdata, USER_APK_ROOT)
        ]
        records += [
            ApkRecord(package=apk_package(path.rsplit("/", 1)[1]), apk_path=path, origin=ApkOrigin.SYSTEM)
            for path in _apk_files(system, SYSTEM_APK_ROOT)
        ]
        return records

    @staticmethod
    def _external_root(userdata: SnapshotArchive, sdcard: Optional[SnapshotArchive]) -> Tuple[SnapshotArchive, str]:
        if sdcard is not None:
            return sdcard, EXTERNAL_APP_DATA
        return userdata, f"{EMULATED_EXTERNAL_ROOT}/{EXTERNAL_APP_DATA}"

    @staticmethod
    def map_external_storage(
            userdata: SnapshotArchive,
            sdcard: Optional[SnapshotArchive] = None,
            packages: Optional[Set[str]] = None,
    ) -> List[ExternalStorageRecord]:
        """
        Pair each Android/data/<pkg> directory with a private data/<pkg>.

        External storage is the emulated card at data/media/0 unless a
        physical sdcard archive is given. orphan marks app data left on
        external storage with no private directory (a likely uninstall).
        """
        if packages is None:
            packages = set(AppScanService.package_dirs(userdata, [])) if DATA_ROOT in directories(userdata) else set()
        archive, root = AppScanService._external_root(userdata, sdcard)
        known = directories(archive)
        if root not in known:
            return []
        return [
            ExternalStorageRecord(package=name, external_dir=f"{root}/{name}", orphan=name not in packages)
            for name in list_dir(archive, root)
            if f"{root}/{name}" in known
        ]

    @staticmethod
    def enumerate_packages(
            userdata: SnapshotArchive,
            system: Optional[SnapshotArchive] = None,
            sdcard: Optional[SnapshotArchive] = None,
    ) -> AppScanResult:
        """
        Build one AppRecord per package directory, with its storage
        categories, external directory, APK and system flag.

        Args:
            userdata: Parsed userdata archive
            system: Parsed system archive, to flag system apps
            sdcard: Parsed physical SD card archive, if any

        Returns:
            AppScanResult: apps, external storage pairing, APKs and warnings

        Raises:
            NoDataDirectory: userdata has no data/ directory
        """
        warnings: List[str] = []
        packages = AppScanService.package_dirs(userdata, warnings)
        known = directories(userdata)
        external = AppScanService.map_external_storage(userdata, sdcard, set(packages))
        external_dirs = {record.package: record.external_dir for record in external}
        apks = AppScanService.collect_apks(userdata, system)
        user_apks = {a.package: a.apk_path for a in apks if a.origin is ApkOrigin.USER}
        system_apks = {a.package: a.apk_path for a in apks if a.origin is ApkOrigin.SYSTEM}

        apps = []
        for package in packages:
            private_dir = f"{DATA_ROOT}/{package}"
            categories = [
                _category(child) for child in list_dir(userdata, private_dir)
                if f"{private_dir}/{child}" in known
            ]
            apps.append(AppRecord(
                package=package,
                private_dir=private_dir,
                categories=categories,
                external_dir=external_dirs.get(package),
                apk_path=user_apks.get(package) or system_apks.get(package),
                is_system_app=package in system_apks,
            ))
        logger.info(f"Found {len(apps)} app directories, {len(external)} external, {len(apks)} APKs")
        return AppScanResult(apps=apps, external=external, apks=apks, warnings=warnings)
