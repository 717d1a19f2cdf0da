from flow.exceptions import FlowSculptError


class SequenceLimitError(FlowSculptError):
    """
    A pillar was requested for a sequence already at the length cap.
    """


class MissingModelError(FlowSculptError):
    """
    The inference mode needs a model the caller did not provide.
    """
