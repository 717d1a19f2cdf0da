class FlowSculptError(ValueError):
    """
    Base class for every error raised by the flow sculpting toolkit.
    """


class ChannelSpecError(FlowSculptError):
    pass


class InvalidPillarError(FlowSculptError):
    """
    A pillar index or configuration outside the class table.

    Attributes:
        position (int | None): Zero-based position of the offending entry
            in the sequence, when the error comes from a sequence.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class MapLibraryError(FlowSculptError):
    pass


class ImageFormatError(FlowSculptError):
    pass
