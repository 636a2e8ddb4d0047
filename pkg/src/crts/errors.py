"""Exception hierarchy shared across the package."""


class CrtsError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(CrtsError):
    """A required column or field is missing from an input file."""


class DataError(CrtsError):
    """Input data violates a structural invariant (duplicates, bad values)."""


class EmptyDatasetError(DataError):
    """The input file contains a header but no data rows."""


class TooShortTrackError(DataError):
    """Track span is shorter than one output sample interval."""


class FormatError(CrtsError):
    """A .crtd/.crtm/.crts file is malformed or has an unsupported version."""


class ScenarioLookupError(CrtsError):
    """Requested scenario id is unknown or outside the configured split."""


class EndOfSuiteError(CrtsError):
    """Sequential scenario iterator is exhausted."""


class EpisodeStateError(CrtsError):
    """reset/step called out of order (e.g. step after done)."""
