"""Exception types shared across the simulator."""
from __future__ import annotations


class SpiketileError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SpiketileError):
    """Malformed or semantically invalid run configuration."""

    def __init__(self, message: str, *, location: str | None = None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class BitwidthError(SpiketileError):
    """A value fell outside its declared fixed-point range in strict mode."""

    def __init__(self, value: int, bits: int, *, signed: bool, where: dict | None = None):
        self.value = int(value)
        self.bits = int(bits)
        self.signed = bool(signed)
        self.where = dict(where or {})
        kind = "signed" if signed else "unsigned"
        ctx = ", ".join(f"{k}={v}" for k, v in self.where.items())
        msg = f"value {self.value} does not fit in {self.bits} {kind} bits"
        if ctx:
            msg += f" ({ctx})"
        super().__init__(msg)


class CapacityError(SpiketileError):
    """A transfer or resident set exceeded a buffer's capacity."""

    def __init__(self, buffer: str, requested_words: int, capacity_words: int):
        self.buffer = buffer
        self.requested_words = int(requested_words)
        self.capacity_words = int(capacity_words)
        super().__init__(
            f"buffer '{buffer}': requested {requested_words} words, "
            f"capacity {capacity_words} words"
        )


class UnknownPresetError(SpiketileError):
    """Cost-preset lookup key not present in the preset table."""

    def __init__(self, key: str, available: list[str]):
        self.key = key
        self.available = list(available)
        listing = "\n  ".join(available)
        super().__init__(f"no cost preset for {key}; available presets:\n  {listing}")


class VerificationError(SpiketileError):
    """Simulated output diverged from the reference model."""
