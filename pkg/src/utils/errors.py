"""
Specrec Errors
Exception hierarchy shared by the toolkit; each error knows its CLI exit code
"""


class SpecRecError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class ConfigError(SpecRecError):
    """Malformed or inconsistent configuration"""
    exit_code = 3


class MissingFileError(SpecRecError):
    """An input path does not exist"""
    exit_code = 4


class DomainError(SpecRecError, ValueError):
    """Argument outside the domain of an operation"""
    exit_code = 5


class DimensionMismatchError(SpecRecError, ValueError):
    """Grid shapes disagree"""
    exit_code = 6


class CorpusError(SpecRecError):
    """Dataset read/write or format failure"""
    exit_code = 7


class ModelMismatchError(SpecRecError):
    """Checkpoint does not match the schedule, grid or normalization in use"""
    exit_code = 8


class TrainingError(SpecRecError):
    """Training cannot start or diverged"""
    exit_code = 9
