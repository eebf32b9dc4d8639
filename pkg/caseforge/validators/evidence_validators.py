# caseforge/validators/evidence_validators.py
MAX_PATTERN_BYTES = 1024


def validate_pattern_bytes(pattern: bytes) -> bytes:
    """Ensure a search pattern is 1-1024 bytes long."""
    if not pattern:
        raise ValueError("search pattern must not be empty")
    if len(pattern) > MAX_PATTERN_BYTES:
        raise ValueError(f"search pattern of {len(pattern)} bytes exceeds {MAX_PATTERN_BYTES}")
    return pattern
