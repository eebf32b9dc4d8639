# tests/test_reporting.py
import json

import pytest

from caseforge.core.errors import EmptyCase, LedgerTampered, MissingJustification
from caseforge.repositories.case_repository import CaseRepository
from caseforge.repositories.findings_repository import FindingsRepository
from caseforge.repositories.ledger_repository import GENESIS_HASH, LedgerRepository
from caseforge.schemas.acquisition import DeviceIdentity
from caseforge.schemas.device import BootloaderState, BootState
from caseforge.schemas.report import CaseConfig
from caseforge.services.report_service import ReportService
from tests.builders import store_image

EMPTY_MD5 = "d41d8cd98f00b204e9800998ecf8427e"


def record(case_dir, clock, operation, **kwargs):
    return ReportService.record_change(LedgerRepository(case_dir), operation, kwargs.pop("target", "device"),
                                       clock=clock, **kwargs)


@pytest.fixture
def ledger_case(case_dir, clock):
    """Case with identification, an unlock, a boot and one acquisition recorded."""
    case_dir.mkdir(parents=True)
    record(case_dir, clock, "getvar", target="device")
    record(case_dir, clock, "oem unlock", justification="bootloader must be unlocked to boot the live OS",
           mutating=True, device_command="oem unlock")
    record(case_dir, clock, "boot", justification="live OS runs from RAM to expose block devices",
           mutating=True, device_command="boot")
    record(case_dir, clock, "acquire", target="userdata", detail=f"md5 {EMPTY_MD5}")
    return case_dir


@pytest.fixture
def report_case(ledger_case):
    """ledger_case plus case.json, device.json, two images, findings and annotations."""
    case_dir = ledger_case
    CaseRepository(case_dir).create(CaseConfig(case_id="case-001", case_dir=case_dir, created=1_400_000_000))
    CaseRepository(case_dir).save_device(DeviceIdentity(
        model="SimPhone", android_version="4.4.2", bootloader_state="Unlocked", product="simphone",
    ))
    store_image(case_dir, "userdata", b"userdata bytes")
    store_image(case_dir, "boot", b"boot bytes", device_data=b"boot bytes, as the device saw them")
    FindingsRepository(case_dir).save_json("apps", {"apps": []})
    (case_dir / "annotations.json").write_text(json.dumps({"examiner": "J. Doe"}))
    return case_dir


def rewrite_ledger(case_dir, edit):
    path = case_dir / "ledger.jsonl"
    lines = path.read_text().splitlines()
    path.write_text("".join(line + "\n" for line in edit(lines)))


# ==================== LEDGER TESTS ====================

def test_record_change_chains_entries(ledger_case):
    """Test seq numbering and hash links."""
    entries = LedgerRepository(ledger_case).get_all()
    assert [e.seq for e in entries] == [1, 2, 3, 4]
    assert entries[0].prev_hash == GENESIS_HASH
    assert all(later.prev_hash == earlier.record_hash for earlier, later in zip(entries, entries[1:]))
    assert [e.timestamp for e in entries] == [1_400_000_000, 1_400_000_001, 1_400_000_002, 1_400_000_003]
    assert ReportService.verify_chain(entries) == (True, [])


def test_record_change_requires_justification(case_dir, clock):
    """Test a mutating operation without a reason is refused and nothing is written."""
    case_dir.mkdir()
    with pytest.raises(MissingJustification):
        record(case_dir, clock, "oem unlock", justification="  ", mutating=True)
    assert LedgerRepository(case_dir).get_all() == []


def test_record_change_flash_implies_mutating(case_dir, clock):
    """Test flash changes are always device changes."""
    case_dir.mkdir()
    with pytest.raises(ValueError):
        record(case_dir, clock, "oem unlock", justification="x", flash_mutating=True)


def test_verify_chain_detects_edited_entry(ledger_case):
    """Test rewriting an entry's justification breaks its hash."""
    def edit(lines):
        entry = json.loads(lines[1])
        entry["justification"] = "routine"
        lines[1] = json.dumps(entry)
        return lines

    rewrite_ledger(ledger_case, edit)
    valid, problems = ReportService.verify_chain(LedgerRepository(ledger_case).get_all())
    assert not valid
    assert problems == ["entry 2: record_hash does not match its contents"]


def test_verify_chain_detects_removed_entry(ledger_case):
    """Test dropping an entry breaks the next link."""
    rewrite_ledger(ledger_case, lambda lines: lines[:1] + lines[2:])
    valid, problems = ReportService.verify_chain(LedgerRepository(ledger_case).get_all())
    assert not valid
    assert problems == ["entry 3: prev_hash does not match the previous record"]


def test_verify_chain_detects_reordering(ledger_case):
    """Test seq must increase."""
    rewrite_ledger(ledger_case, lambda lines: [lines[1], lines[0]] + lines[2:])
    valid, problems = ReportService.verify_chain(LedgerRepository(ledger_case).get_all())
    assert not valid
    assert "entry 1: seq does not increase after 2" in problems


def test_ledger_unreadable_line(ledger_case):
    """Test garbage in the ledger file."""
    rewrite_ledger(ledger_case, lambda lines: lines + ["{not json"])
    with pytest.raises(LedgerTampered):
        LedgerRepository(ledger_case).get_all()


def test_replay_ledger(ledger_case, locked_profile, clock):
    """Test the recorded device commands reproduce the final device state."""
    entries = LedgerRepository(ledger_case).get_all()
    assert ReportService.device_commands(entries) == ["oem unlock", "boot"]
    replayed = ReportService.replay_ledger(locked_profile, entries, clock)
    assert replayed.bootloader is BootloaderState.UNLOCKED
    assert replayed.boot_state is BootState.LIVE_OS
    assert replayed.partitions == locked_profile.partitions
    assert locked_profile.bootloader is BootloaderState.LOCKED


# ==================== REPORT TESTS ====================

def test_hash_statement(report_case):
    """Test matching and mismatching digests are worded differently."""
    images = {image.partition: image for image in ReportService.build_report(report_case).images}
    assert images["userdata"].hash_statement.startswith("MD5 ")
    assert "match the digests taken from the block device /dev/block/" in images["userdata"].hash_statement
    assert images["boot"].hash_statement.startswith("MISMATCH: boot.img has MD5 ")
    assert images["boot"].unverified


def test_build_report_contents(report_case):
    """Test every section is assembled from the case directory."""
    report = ReportService.build_report(report_case)
    assert report.case_id == "case-001"
    assert report.created == 1_400_000_003
    assert report.device.model == "SimPhone"
    assert [s.image.partition for s in report.images] == ["boot", "userdata"]
    assert [e.seq for e in report.mutating_entries] == [2, 3]
    assert report.findings == {"apps": {"apps": []}}
    assert report.annotations == {"examiner": "J. Doe"}
    assert report.ledger_chain_valid
    assert report.warnings == ["UnverifiedImage: boot.img failed hash verification"]


def test_build_report_case_id_from_directory(ledger_case):
    """Test a case without case.json is named after its directory."""
    store_image(ledger_case, "cache", b"")
    report = ReportService.build_report(ledger_case)
    assert report.case_id == "case-001"
    assert report.device is None
    assert report.images[0].image.local_md5 == EMPTY_MD5


def test_build_report_empty_case(case_dir, clock):
    """Test a report needs both a ledger and an image."""
    case_dir.mkdir()
    with pytest.raises(EmptyCase):
        ReportService.build_report(case_dir)
    record(case_dir, clock, "getvar")
    with pytest.raises(EmptyCase):
        ReportService.build_report(case_dir)


def test_build_report_tampered_ledger(report_case):
    """Test chain problems are reported, not hidden."""
    rewrite_ledger(report_case, lambda lines: lines[:1] + lines[2:])
    report = ReportService.build_report(report_case)
    assert not report.ledger_chain_valid
    assert "LedgerTampered: entry 3: prev_hash does not match the previous record" in report.warnings
    assert "- Ledger chain: BROKEN" in ReportService.render_markdown(report)


def test_render_markdown_sections(report_case):
    """Test the unverified banner, change accounting and annotations."""
    markdown = ReportService.render_markdown(ReportService.build_report(report_case))
    assert markdown.startswith("# Case report: case-001\n")
    assert "## UNVERIFIED IMAGES" in markdown
    assert "> **UNVERIFIED** boot.img: MISMATCH" in markdown
    assert "- #2 `oem unlock` on device: bootloader must be unlocked to boot the live OS." in markdown
    assert "- #3 `boot` on device: live OS runs from RAM to expose block devices." in markdown
    assert "- apps: see findings/apps.json" in markdown
    assert '- examiner: "J. Doe"' in markdown


def test_render_markdown_no_changes(case_dir, clock):
    """Test a purely passive case says so."""
    case_dir.mkdir()
    record(case_dir, clock, "getvar")
    store_image(case_dir, "userdata", b"x")
    markdown = ReportService.render_markdown(ReportService.build_report(case_dir))
    assert "No operation changed device state." in markdown
    assert "UNVERIFIED" not in markdown


def test_generate_report_is_deterministic(report_case):
    """Test regenerating the report gives byte-identical files."""
    _, json_path, md_path = ReportService.generate_report(report_case)
    first = (json_path.read_bytes(), md_path.read_bytes())
    ReportService.generate_report(report_case)
    assert (json_path.read_bytes(), md_path.read_bytes()) == first
    assert json.loads(first[0])["case_id"] == "case-001"
