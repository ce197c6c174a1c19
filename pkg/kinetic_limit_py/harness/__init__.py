"""
Конфигурация, диагностика, снимки, отчеты и eps-сканирование.
"""

__all__ = ["env_config", "diagnostics", "snapshot_io", "reports", "sweep"]
