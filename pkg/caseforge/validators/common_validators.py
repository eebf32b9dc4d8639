# caseforge/validators/common_validators.py
import re

_MD5_RE = re.compile(r"^[0-9a-f]{32}$")
_SHA1_RE = re.compile(r"^[0-9a-f]{40}$")
_PACKAGE_LABEL_RE = re.compile(r"^[A-Za-z0-9_]+$")


def validate_md5(value: str) -> str:
    if not _MD5_RE.match(value):
        raise ValueError(f"'{value}' is not a 32-digit lowercase hex MD5")
    return value


def validate_sha1(value: str) -> str:
    if not _SHA1_RE.match(value):
        raise ValueError(f"'{value}' is not a 40-digit lowercase hex SHA1")
    return value


def validate_justification(justification: str, mutating: bool) -> str:
    """Any change to the device must be accounted for."""
    if mutating and not justification.strip():
        raise ValueError("a mutating operation must carry a justification")
    return justification


def validate_package_name(name: str) -> str:
    """
    Reverse-domain package grammar: labels of [A-Za-z0-9_] joined by '.',
    at least two labels.
    """
    labels = name.split(".")
    if len(labels) < 2 or not all(_PACKAGE_LABEL_RE.match(label) for label in labels):
        raise ValueError(f"'{name}' is not a package name")
    return name
