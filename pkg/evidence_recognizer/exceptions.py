from __future__ import annotations


class RecognizerException(Exception):
    pass


class ConfigError(RecognizerException, ValueError):
    pass


class InvalidFrameError(RecognizerException):
    pass


class DegenerateFrameError(InvalidFrameError):
    pass


class CodecError(RecognizerException):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class ActionMismatchError(RecognizerException):
    pass


class SurfacePropertyError(RecognizerException):
    pass


class InsufficientPointsError(RecognizerException):
    pass


class FitError(RecognizerException):
    pass


class UnknownFeatureError(RecognizerException):
    pass


class EmptyHypothesisSpaceError(RecognizerException):
    pass


class EmptyBufferError(RecognizerException):
    pass


class MissingModelError(RecognizerException):
    pass


class UnreachableGoalError(RecognizerException):
    pass


class ObjectNotFoundError(RecognizerException):
    pass


class SchemaError(RecognizerException):
    pass
