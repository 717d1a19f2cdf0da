from flow.exceptions import FlowSculptError


class ArchitectureMismatchError(FlowSculptError):
    """
    A checkpoint whose tag or layout does not fit the requested model.
    """
