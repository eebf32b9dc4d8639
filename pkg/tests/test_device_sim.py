# tests/test_device_sim.py
import asyncio
import hashlib
import json

import pytest

from caseforge.acquisition.session import DeviceSession
from caseforge.core.clock import FixedClock
from caseforge.core.errors import ChannelUnavailable, ProfileError, SignatureCheckActive
from caseforge.device_sim.device import (
    FLASH_ROOT,
    SDCARD_PATH,
    DeviceSimulator,
    block_device_path,
    encode_dump_value,
    replay_commands,
)
from caseforge.device_sim.profiles import ACCOUNTS_DB_PATH, load_profile
from caseforge.evidence.archive import parse_archive, read_file
from caseforge.protocol.frames import read_frame, read_stream, read_stream_async
from caseforge.protocol.messages import FastbootStatus, ServiceRequest
from caseforge.schemas.device import PARTITION_NAMES, BootloaderState, BootState
from tests.builders import SLACK_TEXT, live_profile_config, profile_config

CHALLENGE = "0123456789abcdef"


def simulator(**overrides) -> DeviceSimulator:
    return DeviceSimulator(load_profile(profile_config(**overrides)), FixedClock(1_400_000_000, step=1))


def live_simulator(**overrides) -> DeviceSimulator:
    return DeviceSimulator(load_profile(live_profile_config(**overrides)), FixedClock(1_400_000_000, step=1))


def service(sim: DeviceSimulator, request: ServiceRequest):
    """(status payload, body bytes) of one service request answered in-process."""
    raw = sim.handle_service(request)
    frame_end = 4 + int(raw[:4], 16)
    return raw[4:frame_end], raw[frame_end:]


# ==================== PROFILE LOADING TESTS ====================

def test_load_profile_builds_every_partition():
    """Test all five partitions exist and userdata carries the accounts database."""
    profile = load_profile(profile_config())
    assert set(profile.partitions) == set(PARTITION_NAMES)
    archive = parse_archive(profile.partitions["userdata"])
    assert read_file(archive, ACCOUNTS_DB_PATH).startswith(b"SQLite format 3\x00")
    assert archive.slack == SLACK_TEXT.encode("utf-8")
    assert profile.partitions["cache"] == b""
    assert len(profile.partitions["recovery"]) == 1024


def test_load_profile_filler_repeats_pattern():
    """Test raw partitions repeat their fill pattern up to size."""
    profile = load_profile(profile_config())
    assert profile.partitions["boot"][:16] == b"ANDROID!ANDROID!"
    assert len(profile.partitions["boot"]) == 2048


def test_load_profile_from_file(tmp_path):
    """Test profiles load from a JSON file path."""
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(profile_config()), encoding="utf-8")
    assert load_profile(path).model == "SimPhone"


def test_load_profile_without_accounts_db():
    """Test materialize_accounts_db false leaves accounts.db out of userdata."""
    profile = load_profile(profile_config(materialize_accounts_db=False))
    archive = parse_archive(profile.partitions["userdata"])
    assert ACCOUNTS_DB_PATH not in {entry.path for entry in archive.entries}
    assert len(profile.accounts_store) == 2


def test_load_profile_unreadable_file(tmp_path):
    """Test a missing or non-JSON profile is a ProfileError."""
    with pytest.raises(ProfileError):
        load_profile(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ProfileError):
        load_profile(bad)


def test_load_profile_unknown_partition():
    """Test partitions outside the fixed set are rejected."""
    config = profile_config()
    config["partitions"]["misc"] = {"size": 4}
    with pytest.raises(ProfileError):
        load_profile(config)


def test_load_profile_challenge_needs_key():
    """Test an unlock challenge without its key is rejected."""
    with pytest.raises(ProfileError):
        load_profile(profile_config(unlock_challenge=CHALLENGE))


def test_load_profile_bad_challenge():
    """Test challenges must be 16 lowercase hex digits."""
    with pytest.raises(ProfileError):
        load_profile(profile_config(unlock_challenge="NOT-HEX", unlock_key="k"))


def test_load_profile_content_larger_than_size():
    """Test a partition whose archive exceeds its declared size is rejected."""
    config = profile_config()
    config["partitions"]["system"]["size"] = 4
    with pytest.raises(ProfileError):
        load_profile(config)


def test_load_profile_duplicate_token_type():
    """Test the accounts.db unique constraints surface as ProfileError."""
    accounts = [{"id": 1, "name": "a", "type": "t", "authtokens": [["oauth", "x"], ["oauth", "y"]]}]
    with pytest.raises(ProfileError):
        load_profile(profile_config(accounts=accounts))


# ==================== FASTBOOT CHANNEL TESTS ====================

def test_getvar_values():
    """Test the supported getvar variables."""
    sim = simulator(wipe_on_unlock=True)
    assert sim.handle_fastboot("getvar:product").body == "simphone"
    assert sim.handle_fastboot("getvar:version").body == "0.4"
    assert sim.handle_fastboot("getvar:unlocked").body == "no"
    assert sim.handle_fastboot("getvar:unlock-wipes").body == "yes"
    assert sim.handle_fastboot("getvar:serialno").status is FastbootStatus.FAIL


def test_getvar_unlock_wipes_not_reported():
    """Test a bootloader that does not expose unlock-wipes."""
    response = simulator(reports_unlock_wipes=False).handle_fastboot("getvar:unlock-wipes")
    assert response.status is FastbootStatus.FAIL
    assert response.body == "GetVar Variable Not found"


def test_fastboot_requires_fastboot_mode():
    """Test every fastboot command fails outside fastboot mode."""
    sim = live_simulator()
    response = sim.handle_fastboot("getvar:product")
    assert response.status is FastbootStatus.FAIL
    assert response.body == "device not in fastboot mode"
    assert sim.begin_download(10).body == "device not in fastboot mode"


def test_unknown_fastboot_command():
    """Test unsupported commands such as flash are refused."""
    response = simulator().handle_fastboot("flash:userdata")
    assert response.status is FastbootStatus.FAIL


def test_oem_unlock_without_wipe_keeps_userdata():
    """Test unlocking a device without wipe semantics leaves userdata intact."""
    sim = simulator()
    before = sim.profile.partitions["userdata"]
    response = sim.handle_fastboot("oem unlock")
    assert response.ok
    assert sim.profile.bootloader is BootloaderState.UNLOCKED
    assert sim.profile.partitions["userdata"] == before


def test_oem_unlock_with_wipe_zeroes_userdata():
    """Test a wiping unlock zeroes userdata at the same size."""
    sim = simulator(wipe_on_unlock=True)
    size = len(sim.profile.partitions["userdata"])
    response = sim.handle_fastboot("oem unlock")
    assert response.ok
    assert "wiped" in response.body
    assert sim.profile.partitions["userdata"] == bytes(size)


def test_oem_unlock_wipe_bypass():
    """Test an applied wipe bypass makes the unlock non-destructive."""
    sim = simulator(wipe_on_unlock=True, wipe_bypass_applied=True)
    before = sim.profile.partitions["userdata"]
    assert sim.handle_fastboot("getvar:unlock-wipes").body == "no"
    assert sim.handle_fastboot("oem unlock").ok
    assert sim.profile.partitions["userdata"] == before


def test_oem_unlock_already_unlocked():
    """Test a second unlock is a no-op."""
    sim = simulator(bootloader="Unlocked")
    response = sim.handle_fastboot("oem unlock")
    assert response.ok
    assert response.body == "already unlocked"


def test_oem_unlock_key_challenge_flow():
    """Test need key, wrong key, then the right key."""
    sim = simulator(unlock_challenge=CHALLENGE, unlock_key="s3cret")
    first = sim.handle_fastboot("oem unlock")
    assert first.status is FastbootStatus.FAIL
    assert first.body == f"need key: {CHALLENGE}"
    assert sim.profile.bootloader is BootloaderState.UNLOCK_PENDING_KEY

    wrong = sim.handle_fastboot("oem unlock:guess")
    assert wrong.body == "wrong key"
    assert sim.profile.bootloader is BootloaderState.UNLOCK_PENDING_KEY

    assert sim.handle_fastboot("oem unlock:s3cret").ok
    assert sim.profile.bootloader is BootloaderState.UNLOCKED


def test_boot_refused_when_locked():
    """Test a locked bootloader refuses to boot a downloaded image."""
    sim = simulator()
    response = sim.handle_fastboot("boot", b"live-os")
    assert response.body == "boot refused: bootloader locked"
    assert sim.profile.boot_state is BootState.FASTBOOT_MODE


def test_boot_without_download():
    """Test boot needs an image first."""
    sim = simulator(bootloader="Unlocked")
    assert sim.handle_fastboot("boot").status is FastbootStatus.FAIL


def test_boot_live_os_leaves_partitions_untouched():
    """Test booting changes boot state only."""
    sim = simulator(bootloader="Unlocked")
    before = dict(sim.profile.partitions)
    assert sim.handle_fastboot("boot", b"live-os").ok
    assert sim.profile.boot_state is BootState.LIVE_OS
    assert sim.profile.partitions == before


def test_download_phase():
    """Test the DATA phase announces the size and checks what arrives."""
    sim = simulator()
    assert sim.begin_download(0).body == "empty download"
    announced = sim.begin_download(1024)
    assert announced.status is FastbootStatus.DATA
    assert announced.data_size() == 1024
    assert sim.finish_download(b"x" * 10, 1024).status is FastbootStatus.FAIL
    assert sim.pending_download is None
    assert sim.finish_download(b"x" * 1024, 1024).ok
    assert sim.pending_download == b"x" * 1024


# ==================== SERVICE CHANNEL TESTS ====================

def test_service_refused_in_fastboot_mode():
    """Test the service channel is offline while in fastboot."""
    status, _ = service(simulator(), ServiceRequest.getprop("ro.product.model"))
    assert status == b"FAILdevice offline"


def test_service_unauthorized_on_locked_stock_os():
    """Test a screen-locked stock OS refuses the service channel."""
    status, _ = service(simulator(boot_state="StockLocked"), ServiceRequest.getprop("ro.product.model"))
    assert status == b"FAILdevice unauthorized"


def test_block_access_requires_live_os():
    """Test shell and forward need the live OS even on an unlocked stock OS."""
    sim = simulator(boot_state="StockUnlockedScreen")
    status, _ = service(sim, ServiceRequest.getprop("ro.product.model"))
    assert status == b"OKAY"
    status, _ = service(sim, ServiceRequest.forward("/" + block_device_path("userdata")))
    assert status.startswith(b"FAIL")


def test_getprop_values():
    """Test the identification properties."""
    sim = live_simulator(encryption_enabled=True)
    _, body = service(sim, ServiceRequest.getprop("ro.product.model"))
    assert body == b"0008SimPhone"
    _, body = service(sim, ServiceRequest.getprop("ro.crypto.state"))
    assert body.endswith(b"encrypted")
    _, body = service(sim, ServiceRequest.getprop("no.such.prop"))
    assert body == b"0000"


def test_shell_md5sum_matches_partition():
    """Test md5sum answers in coreutils format over the partition bytes."""
    sim = live_simulator()
    path = "/" + block_device_path("system")
    status, body = service(sim, ServiceRequest.shell(f"md5sum {path}"))
    assert status == b"OKAY"
    digest = hashlib.md5(sim.profile.partitions["system"]).hexdigest()
    assert read_stream(body).decode() == f"{digest}  {path}\n"


def test_shell_md5sum_of_empty_partition():
    """Test the empty cache partition hashes to the empty-input digest."""
    sim = live_simulator()
    path = "/" + block_device_path("cache")
    _, body = service(sim, ServiceRequest.shell(f"md5sum {path}"))
    assert read_stream(body).decode().startswith("d41d8cd98f00b204e9800998ecf8427e  ")


def test_shell_rejects_other_commands():
    """Test only md5sum and sha1sum are available."""
    status, _ = service(live_simulator(), ServiceRequest.shell("dd if=/dev/zero of=/dev/block/mmcblk0"))
    assert status.startswith(b"FAIL")


def test_forward_streams_partition():
    """Test forward returns the exact partition bytes."""
    sim = live_simulator()
    status, body = service(sim, ServiceRequest.forward(FLASH_ROOT + "userdata"))
    assert status == b"OKAY"
    assert read_stream(body) == sim.profile.partitions["userdata"]


def test_forward_unknown_node():
    """Test unknown block devices are refused."""
    status, _ = service(live_simulator(), ServiceRequest.forward(FLASH_ROOT + "modem"))
    assert status == b"FAILno such device"


def test_forward_without_sdcard():
    """Test the sdcard node is unknown when no card is inserted."""
    status, _ = service(live_simulator(), ServiceRequest.forward(SDCARD_PATH))
    assert status == b"FAILno such device"


def test_forward_encrypted_userdata():
    """Test encrypted userdata streams XOR-ed with the key byte."""
    sim = live_simulator(encryption_enabled=True)
    _, body = service(sim, ServiceRequest.forward(FLASH_ROOT + "userdata"))
    plain = sim.profile.partitions["userdata"]
    assert read_stream(body) == bytes(b ^ 0x5A for b in plain)


def test_forward_flip_bit_fault():
    """Test the flip_bit fault corrupts exactly one bit in transit."""
    sim = live_simulator(faults={"flip_bit": 9})
    _, body = service(sim, ServiceRequest.forward(FLASH_ROOT + "system"))
    received = read_stream(body)
    original = sim.profile.partitions["system"]
    assert received[1] == original[1] ^ 0x02
    assert received[:1] + received[2:] == original[:1] + original[2:]


def test_forward_truncate_fault():
    """Test the truncate_at fault drops the terminator."""
    sim = live_simulator(faults={"truncate_at": 20})
    _, body = service(sim, ServiceRequest.forward(FLASH_ROOT + "system"))
    assert len(body) == 20
    assert not body.endswith(b"0000")


def test_service_requests_never_mutate_partitions():
    """Test a burst of service requests leaves every partition unchanged."""
    sim = live_simulator()
    before = sim.snapshot()
    for request in (
        ServiceRequest.getprop("ro.product.model"),
        ServiceRequest.shell("sha1sum /" + block_device_path("userdata")),
        ServiceRequest.forward(FLASH_ROOT + "userdata"),
        ServiceRequest.logcat(),
    ):
        sim.handle_service(request)
    assert sim.profile.partitions == before.partitions


# ==================== LOGCAT SOURCE TESTS ====================

def test_credential_dump_requires_bypass():
    """Test the dump is refused while signature checks are active."""
    sim = simulator(signature_check_bypassed=False)
    with pytest.raises(SignatureCheckActive):
        sim.emit_credential_dump()
    assert sim.profile.logcat_log == []


def test_credential_dump_lines():
    """Test the dump writes account, authtoken and extra lines."""
    sim = simulator()
    lines = sim.emit_credential_dump()
    messages = [line.message for line in lines]
    assert messages[0] == "account id=1 name=u@x.com type=com.dropbox.android password="
    assert messages[1] == "authtoken account=1 type=oauth authtoken=tokA"
    assert messages[2] == "extra account=1 key=refresh value=rT"
    assert messages[3] == "account id=2 name=alice@example.com type=com.example.appname password=tok123"
    assert all(line.tag == "CREDDUMP" for line in lines)
    assert lines[0].render() == f"1400000000 CREDDUMP: {messages[0]}\n"


def test_credential_dump_null_password():
    """Test a missing password renders as <null>."""
    accounts = [{"id": 7, "name": "n", "type": "t"}]
    sim = simulator(accounts=accounts)
    (line,) = sim.emit_credential_dump()
    assert line.message.endswith("password=<null>")


def test_encode_dump_value():
    """Test spaces and separators are percent-encoded."""
    assert encode_dump_value("a b=c") == "a%20b%3Dc"
    assert encode_dump_value("u@x.com") == "u@x.com"
    assert encode_dump_value(None) == "<null>"


def test_stale_dex_error_line():
    """Test the DexOpt error names the framework jar."""
    line = simulator().emit_stale_dex_error("com.android.phone")
    assert line.tag == "dalvikvm"
    assert line.message == "DexOpt: StaleDexCacheError: /system/framework/com.android.phone.jar needs rebuild"


def test_logcat_service_returns_log():
    """Test logcat streams every rendered line."""
    sim = live_simulator()
    sim.emit_stale_dex_error("com.android.mms")
    status, body = service(sim, ServiceRequest.logcat())
    assert status == b"OKAY"
    assert b"StaleDexCacheError" in read_stream(body)


# ==================== REPLAY TESTS ====================

def test_replay_commands_is_deterministic():
    """Test replaying the same commands twice yields identical state."""
    profile = load_profile(profile_config(wipe_on_unlock=True))
    commands = ["getvar:product", "oem unlock", "boot"]
    first = replay_commands(profile, commands, FixedClock(1))
    second = replay_commands(profile, commands, FixedClock(1))
    assert first == second
    assert first.boot_state is BootState.LIVE_OS
    assert first.partitions["userdata"] == bytes(len(profile.partitions["userdata"]))


def test_replay_commands_leaves_input_untouched():
    """Test replay works on a copy."""
    profile = load_profile(profile_config())
    replay_commands(profile, ["oem unlock"], FixedClock(1))
    assert profile.bootloader is BootloaderState.LOCKED


# ==================== TCP SERVER TESTS ====================

@pytest.mark.asyncio
async def test_server_getprop_over_tcp(device_server, live_profile):
    """Test the service channel answers over a real socket."""
    device = device_server(live_profile)
    ok, model = await device.session().getprop("ro.product.model")
    assert ok
    assert model == "SimPhone"


@pytest.mark.asyncio
async def test_server_forward_port(device_server, live_profile):
    """Test the forward port serves block devices like the service port."""
    device = device_server(live_profile)
    session = device.session()
    request = ServiceRequest.forward("/" + block_device_path("system"))
    async with session.service(request, port=device.forward_port) as (ok, reason, reader):
        assert ok, reason
        data = await read_stream_async(reader)
    assert data == live_profile.partitions["system"]


@pytest.mark.asyncio
async def test_server_malformed_request(device_server, live_profile):
    """Test a malformed service request is answered with FAIL."""
    device = device_server(live_profile)
    reader, writer = await asyncio.open_connection("127.0.0.1", device.service_port)
    writer.write(b"000Bformat:data")
    await writer.drain()
    frame = await read_frame(reader)
    writer.close()
    assert frame.payload.startswith(b"FAIL")


@pytest.mark.asyncio
async def test_server_fastboot_download_and_boot(device_server, clock):
    """Test download + boot on one fastboot connection brings up the live OS."""
    device = device_server(load_profile(profile_config(bootloader="Unlocked")))
    async with device.session().fastboot() as connection:
        assert (await connection.download(b"live-os-image")).ok
        assert (await connection.command("boot")).ok
    assert device.profile.boot_state is BootState.LIVE_OS


@pytest.mark.asyncio
async def test_server_getvars(device_server, locked_profile):
    """Test several getvars on one connection."""
    device = device_server(locked_profile)
    product, unlocked = await device.session().getvars("product", "unlocked")
    assert product.body == "simphone"
    assert unlocked.body == "no"


@pytest.mark.asyncio
async def test_server_idle_fastboot_connection_does_not_block_service(device_server, live_profile):
    """Test a service request is answered while a fastboot connection sits open."""
    device = device_server(live_profile)
    session = device.session()
    async with session.fastboot() as connection:
        response = await connection.command("getvar:product")
        assert response.body == "device not in fastboot mode"
        ok, model = await asyncio.wait_for(session.getprop("ro.product.model"), 5)
        assert ok and model == "SimPhone"
        assert (await connection.command("getvar:product")).status is FastbootStatus.FAIL


@pytest.mark.asyncio
async def test_session_unreachable_port(device_server, locked_profile):
    """Test connecting to a closed port is ChannelUnavailable."""
    device = device_server(locked_profile)
    port = device.service_port
    device.stop()
    with pytest.raises(ChannelUnavailable):
        await DeviceSession("127.0.0.1", port, port, timeout=1.0).getprop("ro.product.model")
