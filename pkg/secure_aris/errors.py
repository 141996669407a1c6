"""
Exception types shared across the simulator
"""
from typing import Optional


class SecureArisError(Exception):
    """Base class for all simulator errors"""


class ScenarioError(SecureArisError):
    """Scenario invariant violated or scenario file malformed"""


class ChannelError(SecureArisError):
    """Channel dimensions inconsistent or geometry degenerate"""


class LmiError(SecureArisError):
    """LMI builder received invalid input"""


class SolverError(SecureArisError):
    """Conic backend did not return an optimal point"""

    def __init__(self, status: str, message: str = "", block: Optional[str] = None):
        self.status = status
        self.block = block
        detail = f"solver status '{status}'"
        if block:
            detail += f" (violated block: {block})"
        if message:
            detail += f": {message}"
        super().__init__(detail)


class OracleBudgetError(SecureArisError):
    """Exhaustive enumeration would exceed the evaluation budget"""


class TrainingDivergedError(SecureArisError):
    """Training produced non-finite returns"""

    def __init__(self, message: str, checkpoint: Optional[str] = None):
        self.checkpoint = checkpoint
        super().__init__(f"{message} (checkpoint: {checkpoint})" if checkpoint else message)
