# caseforge/device_sim/profiles.py
"""
Build runtime DeviceProfiles from declarative JSON profile configs.

Userdata is always a snapshot archive; when the profile carries accounts, the
AccountManager database is materialized into it with SQLAlchemy.
"""

import json
import logging
import tempfile
from pathlib import Path
from typing import List, Optional, Union

from pydantic import ValidationError
from sqlalchemy.exc import IntegrityError

from caseforge.core.errors import ProfileError
from caseforge.db.session import Base, create_sqlite_engine, session_factory
from caseforge.evidence.archive import build_archive, serialize_archive
from caseforge.repositories.accounts_repository import AccountsRepository
from caseforge.schemas.device import (
    PARTITION_NAMES,
    DeviceProfile,
    FileSpec,
    PartitionSpec,
    ProfileConfig,
    StoredAccount,
)
from caseforge.schemas.evidence import FsEntry

logger = logging.getLogger(__name__)

ACCOUNTS_DB_PATH = "system/users/0/accounts.db"


def materialize_accounts_db(accounts: List[StoredAccount]) -> bytes:
    """Write the accounts / authtokens / extras tables to a fresh SQLite file and return its bytes."""
    try:
        return _write_accounts_db(accounts)
    except IntegrityError as e:
        raise ProfileError(f"accounts store violates the accounts.db constraints: {e.orig}")


def _write_accounts_db(accounts: List[StoredAccount]) -> bytes:
    with tempfile.TemporaryDirectory(prefix="caseforge-accounts-") as tmp:
        path = Path(tmp) / "accounts.db"
        engine = create_sqlite_engine(path)
        try:
            Base.metadata.create_all(engine)
            Session = session_factory(engine)
            with Session() as session:
                repo = AccountsRepository(session)
                for account in accounts:
                    repo.create_account(account.id, account.name, account.type, account.password)
                    for token_type, token in account.authtokens:
                        repo.add_authtoken(account.id, token_type, token)
                    for key, value in account.extras:
                        repo.add_extra(account.id, key, value)
                session.commit()
        finally:
            engine.dispose()
        return path.read_bytes()


def _file_entries(files: List[FileSpec]) -> List[FsEntry]:
    entries = []
    for spec in files:
        if spec.kind == "dir":
            entries.append(FsEntry.directory(spec.path.strip("/"), spec.mtime))
        else:
            entries.append(FsEntry.file(spec.path.strip("/"), spec.content(), spec.mtime))
    return entries


def _pad(name: str, data: bytes, size: Optional[int]) -> bytes:
    if size is None:
        return data
    if size < len(data):
        raise ProfileError(f"partition '{name}' content is {len(data)} bytes, larger than size {size}")
    return data + bytes(size - len(data))


def build_partition(
        name: str,
        spec: Optional[PartitionSpec],
        extra_entries: Optional[List[FsEntry]] = None,
        force_archive: bool = False,
) -> bytes:
    spec = spec or PartitionSpec()
    if spec.files is not None or extra_entries or force_archive:
        entries = _file_entries(spec.files or []) + list(extra_entries or [])
        archive = build_archive(entries, slack=spec.slack_text.encode("utf-8"))
        return _pad(name, serialize_archive(archive), spec.size)
    filler = bytes.fromhex(spec.fill_hex) if spec.fill_hex else b""
    size = spec.size if spec.size is not None else len(filler)
    if not filler:
        return bytes(size)
    repeated = filler * (size // len(filler) + 1)
    return repeated[:size]


def build_profile(config: ProfileConfig) -> DeviceProfile:
    """Turn a declarative config into a runtime profile with raw partition bytes."""
    userdata_extra = []
    if config.accounts and config.materialize_accounts_db:
        userdata_extra.append(FsEntry.file(ACCOUNTS_DB_PATH, materialize_accounts_db(config.accounts)))

    partitions = {}
    for name in PARTITION_NAMES:
        spec = config.partitions.get(name)
        if name == "userdata":
            partitions[name] = build_partition(name, spec, userdata_extra, force_archive=True)
        else:
            partitions[name] = build_partition(name, spec)

    sdcard = build_partition("sdcard", config.sdcard) if config.sdcard is not None else None

    try:
        return DeviceProfile(
            model=config.model,
            product=config.product,
            android_version=config.android_version,
            boot_state=config.boot_state,
            bootloader=config.bootloader,
            unlock_challenge=config.unlock_challenge,
            unlock_key=config.unlock_key,
            wipe_on_unlock=config.wipe_on_unlock,
            wipe_bypass_applied=config.wipe_bypass_applied,
            reports_unlock_wipes=config.reports_unlock_wipes,
            screen_lock_enabled=config.screen_lock_enabled,
            encryption_enabled=config.encryption_enabled,
            partitions=partitions,
            sdcard=sdcard,
            accounts_store=config.accounts,
            signature_check_bypassed=config.signature_check_bypassed,
            faults=config.faults,
        )
    except ValidationError as e:
        raise ProfileError(f"invalid profile: {e}")


def load_profile(source: Union[str, Path, dict]) -> DeviceProfile:
    """Load a profile from a JSON file path or an already-decoded dict."""
    if isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ProfileError(f"cannot read profile {path}: {e}")
    try:
        config = ProfileConfig.model_validate(raw)
    except ValidationError as e:
        raise ProfileError(f"invalid profile config: {e}")
    profile = build_profile(config)
    logger.info(
        f"Loaded profile {profile.model} ({profile.android_version}), "
        f"userdata {len(profile.partitions['userdata'])} bytes, {len(profile.accounts_store)} accounts"
    )
    return profile
