"""Exception hierarchy. Every error raised by the package derives from RulexpError."""


class RulexpError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class InconsistentTerm(RulexpError, ValueError):
    pass


class ValidClause(RulexpError, ValueError):
    pass


class MalformedCsv(RulexpError):
    pass


class UnknownLabelColumn(RulexpError):
    pass


class MissingValue(RulexpError):
    pass


class SchemaMismatch(RulexpError):
    pass


class EmptyTrainingSet(RulexpError):
    pass


class SchemaVersionMismatch(RulexpError):
    pass


class DanglingConditionId(RulexpError):
    pass


class ModelFormatError(RulexpError):
    pass


class CarInTheory(RulexpError):
    pass


class EmptyDataset(RulexpError):
    pass


class ZeroBodySupport(RulexpError, ZeroDivisionError):
    pass


class RuleFormatError(RulexpError):
    pass


class NotACar(RulexpError):
    pass


class NoConflict(RulexpError):
    pass


class ConflictingRuleSet(RulexpError):
    def __init__(self, first, second):
        super().__init__(f"conflicting classification rules: {first} / {second}")
        self.pair = (first, second)


class InfeasibleInstance(RulexpError):
    pass


class OverlappingPreferenceSets(RulexpError, ValueError):
    pass


class TooLargeForOracle(RulexpError):
    pass


class DegenerateClassDistribution(RulexpError):
    pass
