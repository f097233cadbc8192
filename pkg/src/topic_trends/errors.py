"""Exception hierarchy shared by every stage.

The CLI maps ``ConfigError`` to exit status 1 (usage) and ``DataError`` to
exit status 2.
"""


class TopicTrendsError(Exception):
    pass


class ConfigError(TopicTrendsError):
    """Invalid option value or unusable configuration."""


class DataError(TopicTrendsError):
    """Input data is missing, unreadable or inconsistent."""


class IngestError(DataError):
    pass


class OutOfWindowError(DataError):
    pass


class GazetteerError(DataError):
    pass


class ModelMismatchError(DataError):
    pass
