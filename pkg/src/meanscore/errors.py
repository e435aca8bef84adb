"""Exception hierarchy for the mean score package."""


class MeanScoreError(Exception):
    """Base class for all errors raised by this package."""


class SingularDesignError(MeanScoreError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"design matrix is rank deficient at column {column!r}")


class ConvergenceError(MeanScoreError):
    def __init__(self, message, last_beta=None, iterations=None):
        self.last_beta = last_beta
        self.iterations = iterations
        super().__init__(message)


class SeparationError(ConvergenceError):
    pass


class InsufficientDataError(MeanScoreError):
    pass


class InvalidDeltaError(MeanScoreError):
    pass


class VarianceSingularError(MeanScoreError):
    pass


class DegenerateInfluenceError(MeanScoreError):
    pass


class UnsupportedModelError(MeanScoreError):
    """Raised when a fast-path estimator is asked to handle a model it cannot."""


class IllConditionedVarianceError(MeanScoreError):
    pass


class InsufficientClustersError(MeanScoreError):
    pass


class DegenerateCorrectionError(MeanScoreError):
    pass


class DegreesOfFreedomError(MeanScoreError):
    pass


class DataError(MeanScoreError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        super().__init__(message)


class SchemaError(MeanScoreError):
    pass


class CalibrationError(MeanScoreError):
    pass


class MultipleImputationError(MeanScoreError):
    pass


class SelectionModelConvergenceError(ConvergenceError):
    pass


class ExtremeWeightError(MeanScoreError):
    pass


class StudyError(MeanScoreError):
    pass
