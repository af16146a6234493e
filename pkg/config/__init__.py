"""配置加载入口。"""

from .settings import (
    BudgetSettings,
    ObservabilitySettings,
    ProbeSettings,
    Settings,
    load_settings,
)

__all__ = [
    "BudgetSettings",
    "ObservabilitySettings",
    "ProbeSettings",
    "Settings",
    "load_settings",
]
