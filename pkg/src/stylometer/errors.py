"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
0 success / 1 usage / 2 data / 3 endpoint.
"""


class StylometerError(Exception):
    exit_code = 2


class DataError(StylometerError):
    exit_code = 2


class EmptyInput(DataError):
    pass


class TooFewSentences(DataError):
    pass


class ZeroVector(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class InsufficientGroups(DataError):
    pass


class MissingColumn(DataError):
    pass


class MissingField(DataError):
    pass


class NotEnoughSamples(DataError):
    pass


class SchemaViolation(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CorpusUnreadable(DataError):
    pass


class EmptyResults(DataError):
    pass


class MissingLabels(DataError):
    pass


class ModelUnreadable(DataError):
    pass


class UsageError(StylometerError):
    exit_code = 1


class EndpointError(StylometerError):
    """Base for every failure talking to a remote service."""

    exit_code = 3


class EndpointUnavailable(EndpointError):
    pass


class EmptyCompletion(EndpointError):
    pass


class ScorerUnavailable(EndpointError):
    pass


class CheckerUnavailable(EndpointError):
    pass


class EmbedderUnavailable(EndpointError):
    pass


class AllEndpointsFailed(EndpointError):
    pass
