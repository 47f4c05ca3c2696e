"""Exception hierarchy.

Every error carries the process exit code the CLI should use when it escapes
a command: 2 for bad input data or files, 3 for solver non-convergence.
"""


class ClinDiagError(Exception):
    exit_code = 2


# -- encoding --------------------------------------------------------------

class SchemaError(ClinDiagError):
    pass


class EncodingError(ClinDiagError):
    """Base for per-record encoding failures.

    ``row`` is the zero-based record index when the failure happened inside a
    dataset; it is ``None`` for a lone record.
    """

    def __init__(self, message, row=None):
        self.row = row
        self.detail = message
        if row is not None:
            message = f"record {row} (CSV line {row + 2}): {message}"
        super().__init__(message)

    def at_row(self, row):
        return type(self)(self.detail, row=row)


class MissingColumn(EncodingError):
    pass


class UnknownStage(EncodingError):
    pass


class NonNumericCell(EncodingError):
    pass


class NonFiniteValue(EncodingError):
    pass


class UnknownLabelValue(EncodingError):
    pass


class AlreadyStandardized(ClinDiagError):
    pass


class DatasetTooSmall(ClinDiagError):
    pass


class EmptyDataset(ClinDiagError):
    pass


# -- solver / models -------------------------------------------------------

class DimensionMismatch(ClinDiagError):
    pass


class DegenerateProblem(ClinDiagError):
    pass


class InstanceTooLarge(ClinDiagError):
    pass


class SingleClassDataset(ClinDiagError):
    pass


class ZeroWeightVector(ClinDiagError):
    pass


class NonConvergence(ClinDiagError):
    exit_code = 3

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# -- persistence -----------------------------------------------------------

class ModelFileError(ClinDiagError):
    pass


class IoFailure(ModelFileError):
    pass


class VersionMismatch(ModelFileError):
    pass


class CorruptModel(ModelFileError):
    pass


# -- metrics / report ------------------------------------------------------

class EmptyMatrix(ClinDiagError):
    pass


class EmptyRegistry(ClinDiagError):
    pass
