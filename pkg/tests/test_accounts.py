# tests/test_accounts.py
import logging
import random

import pytest

from caseforge.artifacts.sqlite_reader import find_table, sqlite_read
from caseforge.core.errors import MissingAccountsTable, NotFound, ProfileError, SchemaMismatch
from caseforge.device_sim.device import DeviceSimulator
from caseforge.device_sim.profiles import ACCOUNTS_DB_PATH, load_profile, materialize_accounts_db
from caseforge.evidence.archive import parse_archive, read_file
from caseforge.schemas.accounts import UNPARSED_PACKAGE
from caseforge.schemas.artifacts import SqliteTable
from caseforge.schemas.device import LogLine, StoredAccount
from caseforge.services.accounts_service import AccountsService, parse_logcat_line
from tests.builders import profile_config

ALPHABET = "abcdefghijklmnopqrstuvwxyzABC0123456789 .@_-=%+/é"


def accounts_db_tables(profile):
    userdata = parse_archive(profile.partitions["userdata"])
    return sqlite_read(read_file(userdata, ACCOUNTS_DB_PATH))


def summary(records):
    return [(r.id, r.name, r.type, r.password, list(r.authtokens), list(r.extras)) for r in records]


def random_text(rng: random.Random, low: int = 1, high: int = 20) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(rng.randint(low, high)))


def random_accounts(rng: random.Random):
    ids = sorted(rng.sample(range(1, 500), rng.randint(0, 8)))
    accounts = []
    for index, account_id in enumerate(ids):
        token_types = rng.sample(["oauth", "refresh", "mail", "sync"], rng.randint(0, 3))
        extra_keys = rng.sample(["userId", "server", "lastSync", "scope", "email"], rng.randint(0, 3))
        accounts.append({
            "id": account_id,
            "name": f"{random_text(rng)}#{index}",
            "type": rng.choice(["com.dropbox.android", "com.google", "com.example.appname"]),
            "password": rng.choice([None, "", random_text(rng)]),
            "authtokens": [[t, random_text(rng, 0, 30)] for t in token_types],
            "extras": [[k, random_text(rng, 0, 12)] for k in extra_keys],
        })
    return accounts


def expected_summary(accounts):
    return [
        (a["id"], a["name"], a["type"], a["password"],
         [tuple(t) for t in a["authtokens"]], [tuple(e) for e in a["extras"]])
        for a in accounts
    ]


def accounts_table(rows, columns=("_id", "name", "type", "password")):
    return SqliteTable(name="accounts", columns=list(columns), rows=rows, rowids=list(range(1, len(rows) + 1)))


# ==================== accounts.db TESTS ====================

def test_extract_accounts_fixture(locked_profile):
    """Test the join on the materialized fixture store."""
    extraction = AccountsService.extract_accounts(accounts_db_tables(locked_profile))
    assert extraction.provenance == ACCOUNTS_DB_PATH
    assert extraction.orphans == []
    assert summary(extraction.records) == [
        (1, "u@x.com", "com.dropbox.android", "", [("oauth", "tokA")], [("refresh", "rT")]),
        (2, "alice@example.com", "com.example.appname", "tok123", [], [("userId", "42")]),
    ]


def test_accounts_db_tables_mirror_device_schema(locked_profile):
    """Test the link-column names as found on devices."""
    tables = accounts_db_tables(locked_profile)
    assert find_table(tables, "accounts").columns == ["_id", "name", "type", "password"]
    assert "accounts_id" in find_table(tables, "authtokens").columns
    assert "account_id" in find_table(tables, "extras").columns


def test_extract_accounts_closed_loop():
    """Test random stores survive materialize, read and join unchanged."""
    rng = random.Random(4242)
    for _ in range(25):
        accounts = random_accounts(rng)
        profile = load_profile(profile_config(accounts=accounts))
        if not accounts:
            with pytest.raises(NotFound):
                accounts_db_tables(profile)
            continue
        extraction = AccountsService.extract_accounts(accounts_db_tables(profile))
        assert summary(extraction.records) == expected_summary(accounts)
        assert extraction.orphans == []


def test_extract_accounts_orphans(caplog):
    """Test token and extra rows for missing accounts are kept as orphans."""
    tables = [
        accounts_table([(1, "u@x.com", "com.google", None)]),
        SqliteTable(name="authtokens", columns=["_id", "accounts_id", "type", "authtoken"],
                    rows=[(1, 1, "oauth", "t1"), (2, 9, "oauth", "lost")], rowids=[1, 2]),
        SqliteTable(name="extras", columns=["_id", "account_id", "key", "value"],
                    rows=[(1, None, "k", "v")], rowids=[1]),
    ]
    with caplog.at_level(logging.WARNING, logger="caseforge"):
        extraction = AccountsService.extract_accounts(tables)
    assert summary(extraction.records) == [(1, "u@x.com", "com.google", None, [("oauth", "t1")], [])]
    assert [(o.table, o.account_id, o.key, o.value) for o in extraction.orphans] == [
        ("authtokens", 9, "oauth", "lost"),
        ("extras", None, "k", "v"),
    ]
    assert "missing account 9" in caplog.text


def test_extract_accounts_without_side_tables():
    """Test an accounts table alone is enough."""
    extraction = AccountsService.extract_accounts([accounts_table([(3, "n", "t", "p")])])
    assert summary(extraction.records) == [(3, "n", "t", "p", [], [])]


def test_extract_accounts_plain_id_column_and_blobs():
    """Test older schemas with an "id" column; blobs render as hex."""
    table = accounts_table([(1, "n", "t", b"\x01\xff")], columns=("id", "name", "type", "password"))
    (record,) = AccountsService.extract_accounts([table]).records
    assert (record.id, record.password) == (1, "01ff")


def test_extract_accounts_non_integer_id():
    """Test a row with an unusable id is kept with a warning."""
    extraction = AccountsService.extract_accounts([accounts_table([("x", "n", "t", None)])])
    assert extraction.records[0].id == -1
    assert extraction.warnings == ["accounts row with non-integer id 'x'"]


def test_extract_accounts_missing_table():
    with pytest.raises(MissingAccountsTable):
        AccountsService.extract_accounts([SqliteTable(name="extras", columns=["account_id", "key", "value"])])


def test_extract_accounts_schema_mismatch():
    """Test a join column that is not there."""
    with pytest.raises(SchemaMismatch):
        AccountsService.extract_accounts([accounts_table([], columns=("_id", "name"))])
    tables = [
        accounts_table([]),
        SqliteTable(name="authtokens", columns=["_id", "account", "type", "authtoken"]),
    ]
    with pytest.raises(SchemaMismatch):
        AccountsService.extract_accounts(tables)


def test_materialize_rejects_duplicate_names():
    """Test (name, type) is unique in the store."""
    twin = StoredAccount(id=2, name="u@x.com", type="com.google")
    with pytest.raises(ProfileError):
        materialize_accounts_db([StoredAccount(id=1, name="u@x.com", type="com.google"), twin])


# ==================== CREDENTIAL DUMP TESTS ====================

def test_parse_credential_dump_matches_accounts_db(locked_profile, clock):
    """Test the logcat route and the database route agree."""
    lines = DeviceSimulator(locked_profile, clock).emit_credential_dump()
    from_log = AccountsService.parse_credential_dump(line.render() for line in lines)
    from_db = AccountsService.extract_accounts(accounts_db_tables(locked_profile))
    assert from_log.provenance == "logcat"
    assert from_log.warnings == []
    assert summary(from_log.records) == summary(from_db.records)


def test_parse_credential_dump_random_stores(clock):
    """Test percent-encoding and <null> survive on random stores."""
    rng = random.Random(99)
    for _ in range(20):
        accounts = random_accounts(rng)
        profile = load_profile(profile_config(accounts=accounts, materialize_accounts_db=False))
        lines = DeviceSimulator(profile, clock).emit_credential_dump()
        extraction = AccountsService.parse_credential_dump(lines)
        assert summary(extraction.records) == expected_summary(accounts)


def test_parse_credential_dump_ignores_other_output():
    """Test unrelated tags and free text are not parsed."""
    lines = [
        "1400000000 ActivityManager: Start proc com.dropbox.android",
        "not a logcat line",
        "1400000001 CREDDUMP: account id=7 name=bob%40x.com type=com.google password=%3Cnull%3E",
        "1400000002 CREDDUMP: extra account=7 key=server value=<null>",
    ]
    (record,) = AccountsService.parse_credential_dump(lines).records
    assert (record.id, record.name, record.password, record.extras) == (7, "bob@x.com", "<null>", [("server", None)])


@pytest.mark.parametrize("line,reason", [
    ("5 CREDDUMP: authtoken account=7 type=a authtoken=b", "before its account line"),
    ("5 CREDDUMP: account id=x name=a type=b password=c", "invalid literal"),
    ("5 CREDDUMP: account id=1 name=a type=b", "needs fields"),
    ("5 CREDDUMP: account id=1 name=a type=b password=c flag", "is not key=value"),
    ("5 CREDDUMP: session id=1", "unknown record kind"),
])
def test_parse_credential_dump_malformed(line, reason):
    """Test unreadable dump lines are skipped with a warning."""
    extraction = AccountsService.parse_credential_dump([line])
    assert extraction.records == []
    (warning,) = extraction.warnings
    assert warning.startswith("MalformedDumpLine: line 1:")
    assert reason in warning


def test_parse_credential_dump_duplicate_account():
    """Test a second account line for the same id is refused."""
    lines = [
        "1 CREDDUMP: account id=1 name=a type=b password=c",
        "2 CREDDUMP: account id=1 name=z type=b password=c",
    ]
    extraction = AccountsService.parse_credential_dump(lines)
    assert [r.name for r in extraction.records] == ["a"]
    assert "line 2: account 1 dumped twice" in extraction.warnings[0]


def test_parse_logcat_line():
    assert parse_logcat_line("12 dalvikvm: DexOpt: x\n") == LogLine(timestamp=12, tag="dalvikvm", message="DexOpt: x")
    assert parse_logcat_line("dalvikvm: no timestamp") is None


# ==================== DE-ODEX WORKLIST TESTS ====================

def test_build_deodex_worklist_counts_by_package():
    """Test packages are counted and ordered by first sighting."""
    lines = [
        "10 dalvikvm: DexOpt: StaleDexCacheError: /system/framework/com.android.phone.jar needs rebuild",
        "11 dalvikvm: DexOpt: StaleDexCacheError: /system/app/com.android.mms.apk needs rebuild",
        "12 dalvikvm: DexOpt: StaleDexCacheError: /system/framework/com.android.phone.jar needs rebuild",
        "13 ActivityManager: unrelated",
        "14 dalvikvm: DexOpt: StaleDexCacheError: /system/framework/com.android.phone.jar needs rebuild",
    ]
    items = AccountsService.build_deodex_worklist(lines)
    assert [(i.package, i.occurrences, i.first_seen) for i in items] == [
        ("com.android.phone", 3, 10),
        ("com.android.mms", 1, 11),
    ]
    assert AccountsService.render_worklist(items) == "com.android.phone\ncom.android.mms\n"


def test_build_deodex_worklist_unparsed_package():
    """Test an error line without a readable package is flagged."""
    (item,) = AccountsService.build_deodex_worklist(["20 dalvikvm: DexOpt: StaleDexCacheError: "])
    assert (item.package, item.flagged, item.first_seen) == (UNPARSED_PACKAGE, True, 20)


def test_build_deodex_worklist_from_simulator(locked_profile, clock):
    """Test LogLine objects from the device feed the worklist directly."""
    simulator = DeviceSimulator(locked_profile, clock)
    lines = [simulator.emit_stale_dex_error(p) for p in ("com.android.phone", "com.android.phone", "framework")]
    items = AccountsService.build_deodex_worklist(lines)
    assert [(i.package, i.occurrences, i.flagged) for i in items] == [
        ("com.android.phone", 2, False),
        ("framework", 1, False),
    ]


def test_build_deodex_worklist_empty():
    assert AccountsService.build_deodex_worklist(["1 dalvikvm: DexOpt: load ok"]) == []
