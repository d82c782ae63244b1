"""Exception hierarchy shared across the package."""


class AnscoreError(Exception):
    """Base class for all domain errors raised by this package."""


class DataFormatError(AnscoreError):
    """Malformed input file (bad row, wrong columns, out-of-range score)."""


class EmptyDatasetError(AnscoreError):
    """A load produced zero responses."""


class TransportError(AnscoreError):
    """HTTP backend failed after exhausting retries."""


class CredentialError(AnscoreError):
    """Missing or rejected API credential; never retried."""


class ProtocolError(AnscoreError):
    """Backend returned a response we cannot interpret."""


class ExtractionParseError(AnscoreError):
    """Completion did not contain the expected number of list entries."""


class ExtractionError(AnscoreError):
    """Component extraction failed after exhausting parse retries."""


class LabelParseError(AnscoreError):
    """Completion lacks a valid final 'LABEL: <0|1|2>' marker."""


class AggregationError(AnscoreError):
    """Label stream ended before any value occurred three times."""


class FeaturizationError(AnscoreError):
    """A (response, component) pair exhausted its draw budget."""


class TrainingError(AnscoreError):
    """Ordinal model training failed (non-finite loss, empty data)."""


class StalenessError(AnscoreError):
    """Artifacts built against different component sets were mixed."""


class UndefinedMetricError(AnscoreError):
    """Metric has no defined value on this input (e.g. all-zero deltas)."""
