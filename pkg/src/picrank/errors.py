"""Exception types raised by the retrieval engine.

Every error carries the offending value(s) as attributes so callers can
report precisely what went wrong without parsing the message.
"""

from __future__ import annotations


class PicrankError(Exception):
    """Base class for all engine errors."""


# --- embedding store ---------------------------------------------------------


class DuplicateId(PicrankError):
    def __init__(self, image_id: int):
        self.image_id = image_id
        super().__init__(f"duplicate image id {image_id}")


class DimensionMismatch(PicrankError):
    def __init__(self, expected: int, got: int):
        self.expected = expected
        self.got = got
        super().__init__(f"expected dimension {expected}, got {got}")


class NonFiniteComponent(PicrankError):
    def __init__(self, image_id: int):
        self.image_id = image_id
        super().__init__(f"vector for id {image_id} has a NaN/Inf component")


class UnknownId(PicrankError):
    def __init__(self, image_id: int):
        self.image_id = image_id
        super().__init__(f"id {image_id} not present in store")


class IoFailure(PicrankError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"i/o failure: {detail}")


class BadMagic(PicrankError):
    def __init__(self, got: bytes):
        self.got = got
        super().__init__(f"bad file magic {got!r}")


class UnsupportedVersion(PicrankError):
    def __init__(self, version: int):
        self.version = version
        super().__init__(f"unsupported format version {version}")


class TruncatedPayload(PicrankError):
    def __init__(self, detail: str = ""):
        self.detail = detail
        super().__init__(f"payload shorter than header implies{': ' + detail if detail else ''}")


class UnsortedIds(PicrankError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"ids not strictly increasing at record {position}")


# --- entity index ------------------------------------------------------------


class EmptyAfterNormalization(PicrankError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"entity string {raw!r} is empty after normalization")


class EmptyStore(PicrankError):
    def __init__(self) -> None:
        super().__init__("embedding store holds no records")


class FingerprintMismatch(PicrankError):
    def __init__(self, index_fingerprint: int, store_fingerprint: int):
        self.index_fingerprint = index_fingerprint
        self.store_fingerprint = store_fingerprint
        super().__init__(
            f"index was built against cache {index_fingerprint:#018x}, "
            f"got cache {store_fingerprint:#018x}"
        )


# --- pipeline ----------------------------------------------------------------


class MissingSummary(PicrankError):
    def __init__(self, query_id: int):
        self.query_id = query_id
        super().__init__(f"query {query_id} has no summary (required by this mode)")


class DuplicateQueryId(PicrankError):
    def __init__(self, query_id: int):
        self.query_id = query_id
        super().__init__(f"duplicate query id {query_id} in batch")


# --- encoder i/o -------------------------------------------------------------


class EmptyText(PicrankError):
    def __init__(self) -> None:
        super().__init__("cannot encode empty text")


class SidecarIdMismatch(PicrankError):
    def __init__(self, missing_in_sidecar: set[int], missing_in_binary: set[int]):
        self.missing_in_sidecar = missing_in_sidecar
        self.missing_in_binary = missing_in_binary
        super().__init__(
            f"sidecar/binary id sets differ "
            f"(binary-only: {sorted(missing_in_sidecar)[:5]}, "
            f"sidecar-only: {sorted(missing_in_binary)[:5]})"
        )


# --- evaluation --------------------------------------------------------------


class MalformedLine(PicrankError):
    def __init__(self, line_number: int, line: str = ""):
        self.line_number = line_number
        self.line = line
        super().__init__(f"malformed line {line_number}: {line!r}")


class NoJudgedQueries(PicrankError):
    def __init__(self) -> None:
        super().__init__("no judged queries to average over")


class NoCandidates(PicrankError):
    def __init__(self) -> None:
        super().__init__("no candidate statistics with nonzero postings")
