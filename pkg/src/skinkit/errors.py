"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` so the command line can map failure
classes to distinct process exit statuses without a lookup table elsewhere.
"""


class SkinkitError(Exception):
    exit_code = 1


class MeshIOError(SkinkitError):
    """Unreadable file or unsupported mesh format."""

    exit_code = 3


class EmptyMeshError(MeshIOError):
    exit_code = 4


class InputError(SkinkitError):
    """Malformed JSON input, manifest, chain, scene or frame file."""

    exit_code = 4


class GeometryError(SkinkitError):
    """Geometric precondition failed (non-watertight, disconnected region, ...)."""

    exit_code = 5


class VoxelBudgetError(GeometryError):
    exit_code = 5


class PlacementError(SkinkitError):
    exit_code = 6


class KinematicsError(SkinkitError):
    exit_code = 7


class NetworkError(SkinkitError):
    exit_code = 8


class FrameDecodeError(SkinkitError):
    """Datagram could not be decoded; ``code`` names the failure class."""

    exit_code = 4
    code = "decode_error"


class ShortDatagram(FrameDecodeError):
    code = "short_datagram"


class BadMagic(FrameDecodeError):
    code = "bad_magic"


class UnsupportedVersion(FrameDecodeError):
    code = "unsupported_version"


class OversizeDatagram(FrameDecodeError):
    code = "oversize_datagram"


class SelfIntersectionWarning(UserWarning):
    """Offset shell folds onto itself; ``faces`` lists the offending shell faces."""

    def __init__(self, message, faces=()):
        super().__init__(message)
        self.faces = tuple(int(f) for f in faces)


class CutterOutsideWarning(UserWarning):
    pass
