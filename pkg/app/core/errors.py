from typing import List, Optional, Sequence, Tuple


class AaaMdpError(ValueError):
    """Base class for every error raised by the library."""


class InvalidProcessError(AaaMdpError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"decision process is invalid:\n{report.summary()}")


class InvalidPolicyError(AaaMdpError):
    def __init__(self, missing: Sequence[Tuple] = (), bad_actions: Sequence[Tuple] = (), detail: str = ""):
        self.missing: List[Tuple] = list(missing)
        self.bad_actions: List[Tuple] = list(bad_actions)
        parts = []
        if detail:
            parts.append(detail)
        if self.missing:
            shown = ", ".join(str(m) for m in self.missing[:20])
            more = f" (+{len(self.missing) - 20} more)" if len(self.missing) > 20 else ""
            parts.append(f"policy is missing {len(self.missing)} entries: {shown}{more}")
        if self.bad_actions:
            parts.append(f"policy maps to unknown actions at: {self.bad_actions[:20]}")
        super().__init__("; ".join(parts) or "invalid policy")


class EnumerationTooLargeError(AaaMdpError):
    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"brute-force enumeration needs {count} policies, limit is {limit}")


class HorizonError(AaaMdpError):
    """An age or epoch lies outside the horizon it is used with."""


class ParameterFileError(AaaMdpError):
    def __init__(self, path, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InvalidParametersError(AaaMdpError):
    def __init__(self, report, source: Optional[str] = None):
        self.report = report
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}parameter set is invalid:\n{report.summary()}")


class UnknownBinError(AaaMdpError):
    def __init__(self, labels: Sequence[str]):
        self.labels = list(labels)
        super().__init__(f"unknown diameter bin(s): {', '.join(self.labels)}")


class ReplicateError(AaaMdpError):
    def __init__(self, replicate: int, cause: Exception):
        self.replicate = replicate
        self.cause = cause
        super().__init__(f"replicate {replicate} failed: {cause}")


class GridMismatchError(AaaMdpError):
    """Two value functions or grids do not share states and horizon."""
