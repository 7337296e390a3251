"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
domain failures onto distinct process exit statuses.
"""


class LabError(Exception):
    exit_code = 1

    def payload(self):
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(LabError):
    exit_code = 2


class InputParseError(LabError):
    exit_code = 3

    def __init__(self, message, line=None, position=None):
        super().__init__(message)
        self.line = line
        self.position = position

    def payload(self):
        out = super().payload()
        out.update(line=self.line, position=self.position)
        return out


class ZeroVector(LabError):
    exit_code = 10


class DimMismatch(LabError):
    exit_code = 11


class ZeroProbability(LabError):
    exit_code = 12


class AmplitudeMismatch(LabError):
    exit_code = 13


class NonRealState(LabError):
    exit_code = 14


class DegenerateAngle(LabError):
    exit_code = 15


class NumericalFailure(LabError):
    exit_code = 16


class BranchAmbiguity(LabError):
    exit_code = 17


class CollinearStates(LabError):
    exit_code = 18


class NoApproximation(LabError):
    """No integer power within tolerance; the best candidate is attached."""

    exit_code = 19

    def __init__(self, message, best_k, best_error):
        super().__init__(message)
        self.best_k = best_k
        self.best_error = best_error

    def payload(self):
        out = super().payload()
        out.update(best_k=self.best_k, best_error=self.best_error)
        return out


class ZeroSum(LabError):
    exit_code = 20

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path

    def payload(self):
        out = super().payload()
        out.update(path=self.path)
        return out


class EmptyMarkedSet(LabError):
    exit_code = 21


class UnsupportedMultiplicity(LabError):
    exit_code = 22


class RetryLimit(LabError):
    """Post-selection did not succeed within the retry cap."""

    exit_code = 23
