"""
Exceptions raised by dls-sil
"""

from typing import Optional


class DlsSilError(Exception):
    """Base class for every error raised by the package"""


class ConfigurationError(DlsSilError, ValueError):
    """Invalid parameters, documents or names"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class TraceError(ConfigurationError):
    """A trace was evaluated where it is not defined"""


class EmptyWorkloadError(DlsSilError, ValueError):
    """Statistics requested for a workload with no iterations"""
