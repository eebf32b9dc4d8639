# tests/test_app_scan.py
import logging

import pytest

from caseforge.core.errors import NoDataDirectory
from caseforge.schemas.apps import AppRecord, ApkOrigin
from caseforge.services.app_scan_service import AppScanService, apk_package
from tests.builders import PREFS_XML, make_archive

DROPBOX = "com.dropbox.android"
APPNAME = "com.example.appname"


@pytest.fixture
def userdata():
    """Userdata archive with two packages, one junk directory and emulated external storage."""
    return make_archive(
        files={
            "data/app/com.example.appname-1.apk": b"PK\x03\x04",
            f"data/{DROPBOX}/shared_prefs/{DROPBOX}_preferences.xml": PREFS_XML.encode(),
            f"data/{APPNAME}/files/notes.txt": b"meet at noon",
        },
        dirs=[
            "data",
            "data/app",
            f"data/{DROPBOX}/databases",
            f"data/{APPNAME}/app_webview",
            f"data/{APPNAME}/lib",
            f"data/{APPNAME}/no_backup",
            "data/not-a-package",
            f"data/media/0/Android/data/{DROPBOX}",
            "data/media/0/Android/data/com.removed.app",
        ],
    )


@pytest.fixture
def system():
    return make_archive(
        files={"system/app/Phone.apk": b"PK", f"system/app/{DROPBOX}.apk": b"PK"},
        dirs=["system/app"],
    )


# ==================== PACKAGE DIRECTORY TESTS ====================

def test_package_dirs_skips_junk(userdata, caplog):
    """Test reserved and malformed names under data/ are not packages."""
    warnings = []
    with caplog.at_level(logging.WARNING, logger="caseforge"):
        packages = AppScanService.package_dirs(userdata, warnings)
    assert packages == [DROPBOX, APPNAME]
    assert len(warnings) == 1
    assert "data/not-a-package" in warnings[0]
    assert "not-a-package" in caplog.text


def test_package_dirs_ignores_files_under_data():
    """Test only directories count as packages."""
    archive = make_archive(files={"data/com.looks.like_a.package": b"x"}, dirs=["data/com.real.app"])
    assert AppScanService.package_dirs(archive, []) == ["com.real.app"]


def test_package_dirs_no_data_directory(system):
    """Test a non-userdata archive is refused."""
    with pytest.raises(NoDataDirectory):
        AppScanService.package_dirs(system, [])


# ==================== ENUMERATION TESTS ====================

def test_enumerate_packages_categories(userdata):
    """Test storage categories are normalized and ordered."""
    result = AppScanService.enumerate_packages(userdata)
    apps = {app.package: app for app in result.apps}
    assert apps[DROPBOX].categories == ["shared_prefs", "databases"]
    assert apps[APPNAME].categories == ["files", "lib", "webview", "other"]
    assert apps[APPNAME].private_dir == f"data/{APPNAME}"


def test_enumerate_packages_apks_and_external(userdata):
    """Test each app is paired with its APK and external directory."""
    result = AppScanService.enumerate_packages(userdata)
    apps = {app.package: app for app in result.apps}
    assert apps[APPNAME].apk_path == "data/app/com.example.appname-1.apk"
    assert apps[APPNAME].external_dir is None
    assert apps[DROPBOX].external_dir == f"data/media/0/Android/data/{DROPBOX}"
    assert not apps[DROPBOX].is_system_app
    assert result.warnings == ["skipped data/not-a-package: 'not-a-package' is not a package name"]


def test_enumerate_packages_flags_system_apps(userdata, system):
    """Test a package with an APK under system/app is a system app."""
    result = AppScanService.enumerate_packages(userdata, system=system)
    apps = {app.package: app for app in result.apps}
    assert apps[DROPBOX].is_system_app
    assert apps[DROPBOX].apk_path == f"system/app/{DROPBOX}.apk"
    assert not apps[APPNAME].is_system_app


def test_enumerate_packages_no_data_directory(system):
    with pytest.raises(NoDataDirectory):
        AppScanService.enumerate_packages(system)


# ==================== EXTERNAL STORAGE TESTS ====================

def test_map_external_storage_orphans(userdata):
    """Test external data without a private directory is marked orphaned."""
    records = AppScanService.map_external_storage(userdata)
    assert [(r.package, r.orphan) for r in records] == [(DROPBOX, False), ("com.removed.app", True)]


def test_map_external_storage_physical_card(userdata):
    """Test a physical SD card archive replaces the emulated one."""
    sdcard = make_archive(files={}, dirs=[f"Android/data/{APPNAME}"])
    records = AppScanService.map_external_storage(userdata, sdcard=sdcard)
    assert [(r.package, r.external_dir, r.orphan) for r in records] == [
        (APPNAME, f"Android/data/{APPNAME}", False),
    ]


def test_map_external_storage_missing_root():
    """Test a device without external app data yields nothing."""
    archive = make_archive(files={}, dirs=["data/com.real.app"])
    assert AppScanService.map_external_storage(archive) == []


# ==================== APK TESTS ====================

def test_collect_apks_user_then_system(userdata, system):
    """Test user APKs come first, then system APKs, each in path order."""
    records = AppScanService.collect_apks(userdata, system)
    assert [(r.package, r.origin) for r in records] == [
        (APPNAME, ApkOrigin.USER),
        ("Phone", ApkOrigin.SYSTEM),
        (DROPBOX, ApkOrigin.SYSTEM),
    ]


def test_collect_apks_skips_nested_files():
    """Test only direct children of the APK directory count."""
    archive = make_archive(files={"data/app/lib/arm/libfoo.so": b"", "data/app/com.a.b-2.apk": b""})
    assert [r.apk_path for r in AppScanService.collect_apks(archive)] == ["data/app/com.a.b-2.apk"]


@pytest.mark.parametrize("file_name,package", [
    ("com.example.appname-1.apk", "com.example.appname"),
    ("com.example.appname-12.apk", "com.example.appname"),
    ("Phone.apk", "Phone"),
    ("com.a-b.apk", "com.a-b"),
])
def test_apk_package(file_name, package):
    assert apk_package(file_name) == package


def test_app_record_rejects_unknown_category():
    """Test the category vocabulary is closed."""
    with pytest.raises(ValueError):
        AppRecord(package=DROPBOX, private_dir=f"data/{DROPBOX}", categories=["tmp"])
