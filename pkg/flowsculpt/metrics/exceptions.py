from flow.exceptions import FlowSculptError


class MetricInputError(FlowSculptError):
    """
    Images a metric cannot compare: mismatched sizes, smaller than the
    SSIM window, or an empty shape for the complexity measure.
    """
