# caseforge/core/errors.py
"""
Exception hierarchy.

Services raise these; the CLI turns any CaseforgeError into a non-zero exit
code. Pure validators raise ValueError and the calling service converts it,
the same split the validators/services layers use everywhere else.
"""

from typing import Optional


class CaseforgeError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    exit_code = 1

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.__class__.__name__)
        self.detail = detail or self.__class__.__name__


# ==================== PROTOCOL ====================

class ProtocolError(CaseforgeError):
    pass


class PayloadTooLarge(ProtocolError):
    pass


class BadLengthHeader(ProtocolError):
    pass


class Truncated(ProtocolError):
    pass


class MissingTerminator(ProtocolError):
    pass


# ==================== DEVICE SIMULATOR ====================

class DeviceError(CaseforgeError):
    pass


class SignatureCheckActive(DeviceError):
    pass


class ProfileError(DeviceError):
    pass


# ==================== ACQUISITION ====================

class AcquisitionError(CaseforgeError):
    pass


class ChannelUnavailable(AcquisitionError):
    pass


class WipeGuardTriggered(AcquisitionError):
    pass


class WrongKey(AcquisitionError):
    pass


class UnlockKeyRequired(AcquisitionError):
    def __init__(self, challenge: str):
        super().__init__(f"bootloader requires an unlock key; challenge {challenge}")
        self.challenge = challenge


class NotInFastboot(AcquisitionError):
    pass


class BootRefused(AcquisitionError):
    pass


class TransferFailed(AcquisitionError):
    pass


class StreamTruncated(AcquisitionError):
    pass


class HashMismatch(AcquisitionError):
    def __init__(self, detail: str, image=None):
        super().__init__(detail)
        self.image = image


class UnknownPartition(AcquisitionError):
    pass


# ==================== EVIDENCE STORE ====================

class EvidenceError(CaseforgeError):
    pass


class BadMagic(EvidenceError):
    pass


class TruncatedEntry(EvidenceError):
    pass


class DuplicatePath(EvidenceError):
    pass


class NotFound(EvidenceError):
    pass


class IsDirectory(EvidenceError):
    pass


class EmptyPattern(EvidenceError):
    pass


class EvidenceOverwrite(EvidenceError):
    pass


class CiphertextImage(EvidenceError):
    pass


# ==================== ARTIFACT PARSERS ====================

class ArtifactError(CaseforgeError):
    pass


class MalformedXml(ArtifactError):
    pass


class DuplicateKey(ArtifactError):
    pass


class BadHeader(ArtifactError):
    pass


class UnsupportedEncoding(ArtifactError):
    pass


class OverflowPageUnsupported(ArtifactError):
    pass


class WithoutRowidUnsupported(ArtifactError):
    pass


class CorruptPage(ArtifactError):
    pass


# ==================== APP SCAN ====================

class AppScanError(CaseforgeError):
    pass


class NoDataDirectory(AppScanError):
    pass


# ==================== ACCOUNTS ====================

class AccountsError(CaseforgeError):
    pass


class MissingAccountsTable(AccountsError):
    pass


class SchemaMismatch(AccountsError):
    pass


# ==================== HEAP ====================

class HeapError(CaseforgeError):
    pass


class BadHprofHeader(HeapError):
    pass


class UnsupportedIdSize(HeapError):
    pass


class UnknownHeapSubRecord(HeapError):
    pass


class DanglingReference(HeapError):
    pass


class TruncatedRecord(HeapError):
    pass


class UnknownId(HeapError):
    pass


class Unreachable(HeapError):
    pass


class OqlParseError(HeapError):
    def __init__(self, detail: str, position: Optional[int] = None):
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{detail}{where}")
        self.position = position


class UnknownField(HeapError):
    pass


class TypeMismatch(HeapError):
    pass


# ==================== REPORTING / CASE ====================

class ReportError(CaseforgeError):
    pass


class MissingJustification(ReportError):
    pass


class EmptyCase(ReportError):
    pass


class LedgerTampered(ReportError):
    pass


class CaseError(CaseforgeError):
    pass


class StageOrderViolation(CaseError):
    pass


class CaseLocked(CaseError):
    pass
