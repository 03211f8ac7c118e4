"""Exception hierarchy.

Everything raised on bad *data* derives from :class:`DataError` so the CLI can
map it onto exit code 2 without catching programming errors.
"""


class VihateError(Exception):
    pass


class DataError(VihateError):
    pass


class InvalidSpan(DataError, ValueError):
    pass


class OddTagCount(DataError, ValueError):
    pass


class AlignmentFailure(DataError, ValueError):
    pass


class MalformedIob(DataError, ValueError):
    pass


class LabelTaskMismatch(DataError, ValueError):
    pass


class TaskMismatch(DataError, ValueError):
    pass


class EmptyInput(DataError, ValueError):
    pass


class MissingTask(DataError, ValueError):
    pass


class DegenerateTrainingSet(DataError, ValueError):
    pass


class InsufficientClean(DataError, ValueError):
    pass


class SchemaMismatch(DataError):
    pass


class MalformedRow(DataError):
    pass


class RemoteUnavailable(VihateError):
    """Remote annotator failed after all retries.

    ``last_committed_id`` / ``committed`` describe the checkpoint a labeling
    run can resume from (``None`` / 0 when nothing was committed).
    """

    def __init__(self, message, last_committed_id=None, committed=0):
        super().__init__(message)
        self.last_committed_id = last_committed_id
        self.committed = committed
