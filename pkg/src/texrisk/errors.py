"""Exception hierarchy shared across the pipeline."""


class TexriskError(Exception):
    """Base class for all pipeline errors."""


class EmptyMaskError(TexriskError):
    """No usable foreground component was found in a view."""


class DegenerateBreastMeanError(TexriskError):
    """Interior breast region is empty or its mean intensity is not positive."""


class ParameterOutOfRangeError(TexriskError):
    """A parameter lies outside its declared validation range."""


class ZeroVarianceError(TexriskError):
    """Standardization statistics have zero standard deviation."""


class InvalidDatesError(TexriskError):
    """Diagnosis date precedes the screening date."""


class MissingReferenceRiskError(TexriskError):
    """A reference risk score is required but absent."""


class MissingLateralityError(TexriskError):
    """A cancer case has no recorded cancer laterality."""


class LengthMismatchError(TexriskError):
    """Paired sequences have different lengths."""


class NoValidationPositivesError(TexriskError):
    """Validation set contains no positive women, so AUC is undefined."""


class NoViewsError(TexriskError):
    """A study must contain at least one view."""


class DegenerateClassesError(TexriskError):
    """Positive or negative class is empty under the requested positivity rule."""


class PairingMismatchError(TexriskError):
    """Paired comparison requested on cohorts with different woman sets."""


class EmptyTraceError(TexriskError):
    """A convergence trace has no entries."""


class EmptyReferenceCellError(TexriskError):
    """The odds-ratio reference cell contains no women."""


class InvalidConfigError(TexriskError):
    """A configuration document failed validation."""
