"""基础设施层。"""

from .observability import configure_observability, stage_span

__all__ = ["configure_observability", "stage_span"]
