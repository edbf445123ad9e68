"""Exception hierarchy. Names follow the protocol's failure vocabulary."""


class ClshareError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ClshareError, ValueError):
    """Malformed encoding, frame or scenario file."""


class DecodeError(ParseError):
    """Bytes do not encode a valid group element or scalar."""


# key management
class DuplicateId(ClshareError):
    pass


class BlacklistedId(ClshareError):
    pass


class UnknownId(ClshareError):
    pass


# primitives
class AuthFailure(ClshareError):
    """A signature did not verify."""


class DecryptFailure(ClshareError):
    """Authenticated decryption failed: wrong key or modified ciphertext."""


class EmptyRecipientSet(ClshareError):
    pass


class NoBoxForId(ClshareError):
    pass


# protocols
class StaleTimestamp(ClshareError):
    pass


class UnknownFile(ClshareError):
    pass


class NoEligibleMembers(ClshareError):
    pass


class MissingSegment(ClshareError):
    pass


class HintMismatch(ClshareError):
    pass


class SpSignatureInvalid(ClshareError):
    pass


class UnknownUE(ClshareError):
    pass


class ProtocolViolation(ClshareError):
    """Message arrived in a state where it is not acceptable."""


class StepLimitExceeded(ClshareError):
    pass
