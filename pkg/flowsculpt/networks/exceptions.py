from flow.exceptions import FlowSculptError


class ShapeMismatchError(FlowSculptError):
    """
    An array reached a layer with the wrong shape.

    Attributes:
        layer (str): Name of the layer that rejected the input.
        expected (tuple): Shape the layer was built for (batch axis excluded).
        actual (tuple): Shape it received.
    """

    def __init__(self, layer, expected, actual):
        super().__init__(
            f'{layer}: expected input shape {tuple(expected)}, got {tuple(actual)}'
        )
        self.layer = layer
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class LabelRangeError(FlowSculptError):
    pass


class CheckpointError(FlowSculptError):
    pass


class EmptyDatasetError(FlowSculptError):
    pass
