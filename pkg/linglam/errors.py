from typing import Any, Iterable, Sequence, Tuple


class LinglamError(Exception):
    pass


class InvalidConfiguration(LinglamError, ValueError):
    pass


class NoDataSpecified(LinglamError):
    pass


class ModelError(LinglamError):
    pass


class UnknownVariable(ModelError, KeyError):
    def __init__(self, name: Any):
        self.name = name

    def __str__(self):
        return f"variable {self.name!r} is not part of the graph"


class CyclicGraph(ModelError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = tuple(cycle)

    def __str__(self):
        return f"graph contains a directed cycle through {' -> '.join(self.cycle)}"


class AssumptionViolated(ModelError):
    def __init__(self, violations: Iterable[Any]):
        self.violations = tuple(violations)

    def __str__(self):
        return "model assumptions violated: " + "; ".join(str(v) for v in self.violations)


class GraphTooLarge(ModelError):
    def __init__(self, latent_count: int, limit: int):
        self.latent_count = latent_count
        self.limit = limit

    def __str__(self):
        return (
            f"graph has {self.latent_count} latent variables, "
            f"exhaustive subset enumeration is limited to {self.limit}"
        )


class InvalidCase(ModelError, ValueError):
    def __init__(self, case_id: Any):
        self.case_id = case_id

    def __str__(self):
        return f"unknown case {self.case_id!r}, expected one of 1, 2, 3, 4"


class DataFormatError(LinglamError):
    pass


class NonNumericCell(DataFormatError):
    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value

    def __str__(self):
        return f"cell at row {self.row}, column {self.column!r} is not a finite number: {self.value!r}"


class DuplicateColumn(DataFormatError):
    def __init__(self, name: str):
        self.name = name

    def __str__(self):
        return f"duplicate column name {self.name!r}"


class TooFewRows(DataFormatError):
    def __init__(self, count: int):
        self.count = count

    def __str__(self):
        return f"data has fewer than 2 rows (got {self.count})"


class TooFewSamples(DataFormatError, ValueError):
    def __init__(self, count: int, minimum: int):
        self.count = count
        self.minimum = minimum

    def __str__(self):
        return (
            f"gamma approximation of the HSIC null needs at least {self.minimum} samples, got {self.count}; "
            "use the permutation method for smaller data"
        )


class EmptyColumnSet(DataFormatError, ValueError):
    def __init__(self, role: str):
        self.role = role

    def __str__(self):
        return f"{self.role} column set is empty"


class ColumnOutOfRange(DataFormatError, IndexError):
    def __init__(self, index: int, width: int):
        self.index = index
        self.width = width

    def __str__(self):
        return f"column index {self.index} is out of range for data with {self.width} columns"


class OverlappingColumns(DataFormatError, ValueError):
    def __init__(self, columns: Iterable[int]):
        self.columns: Tuple[int, ...] = tuple(sorted(columns))

    def __str__(self):
        return f"Y and Z column sets overlap on {list(self.columns)}"


class NumericalFailure(LinglamError):
    pass


class SingularCovariance(NumericalFailure):
    def __init__(self, condition_number: float):
        self.condition_number = condition_number

    def __str__(self):
        return f"covariance of Z is singular (condition number {self.condition_number:.3g})"


class ScalarSurrogateUndefined(NumericalFailure):
    def __str__(self):
        return "GIN undefined for scalar Y unless cov(Y,Z)=0"
