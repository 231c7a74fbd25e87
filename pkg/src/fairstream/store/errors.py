from ..errors import FairstreamError, NotFoundError


class StoreError(FairstreamError):
    pass


class UnknownDatastream(NotFoundError):
    def __init__(self, datastream_id):
        self.datastream_id = datastream_id
        super().__init__(f"unknown datastream: {datastream_id}")


class UnknownTimestamp(StoreError):
    """Flag entries referenced timestamps that are not in the datastream."""

    def __init__(self, offenders):
        self.offenders = list(offenders)
        shown = ", ".join(str(t) for t in self.offenders[:5])
        more = "" if len(self.offenders) <= 5 else f" (+{len(self.offenders) - 5} more)"
        super().__init__(f"unknown timestamps: {shown}{more}")


class CorruptSegment(StoreError):
    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{path}: {reason}")


class CorruptFlagColumn(StoreError):
    def __init__(self, path, reason):
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{path}: {reason}")
