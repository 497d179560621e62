"""Exception hierarchy shared across the pipeline.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit codes: 2 = configuration error, 3 = data error,
4 = numeric failure.
"""


class HsiError(Exception):
    exit_code = 1


class ConfigError(HsiError):
    exit_code = 2


class DataError(HsiError):
    exit_code = 3


class NumericError(HsiError):
    exit_code = 4


# -- dataset / cube ----------------------------------------------------------

class MissingFile(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class EmptyIndexSet(DataError):
    pass


class ClassTooSmall(DataError):
    pass


class InvalidSpec(ConfigError):
    pass


# -- autoencoder -------------------------------------------------------------

class NoiseBandsExceedB(ConfigError):
    pass


class SingularSystem(NumericError):
    pass


class EmptyClass(DataError):
    pass


class LengthMismatch(DataError):
    pass


# -- augmentation ------------------------------------------------------------

class AlphaOutOfRange(ConfigError):
    pass


class SingleClassTrainingSet(DataError):
    pass


# -- features ----------------------------------------------------------------

class ModelCountMismatch(ConfigError):
    pass


class IndexOutOfRange(DataError):
    pass


# -- classifier --------------------------------------------------------------

class InvalidTopology(ConfigError):
    pass


class ShapeMismatch(DataError):
    pass


class NonFiniteLoss(NumericError):
    pass


class LabelOutOfRange(DataError):
    pass


# -- evaluation --------------------------------------------------------------

class EmptyTestSet(DataError):
    pass
