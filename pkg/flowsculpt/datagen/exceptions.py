from flow.exceptions import FlowSculptError


class DatasetFormatError(FlowSculptError):
    """
    A dataset file or in-memory dataset that breaks the FSDS layout.
    """
