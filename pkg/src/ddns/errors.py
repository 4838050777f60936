"""Exception hierarchy shared across the stack."""


class DdnsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSeedError(DdnsError):
    pass


class InvalidKeyError(DdnsError):
    pass


class InvalidAddressError(DdnsError):
    pass


class InvalidContentIdError(DdnsError):
    pass


class NotFoundError(DdnsError):
    pass


class CorruptionError(DdnsError):
    pass


class StoreUnavailableError(DdnsError):
    pass


class SerializationError(DdnsError):
    pass


class ControlFileError(DdnsError):
    """Base for control-file problems; carries a structured reason."""

    def __init__(self, reason: str, path: str = "", detail: str = ""):
        self.reason = reason
        self.path = path
        self.detail = detail
        super().__init__(f"{reason}{' at ' + path if path else ''}{': ' + detail if detail else ''}")


class DnsParseError(DdnsError):
    pass


class ConfigError(DdnsError):
    pass
