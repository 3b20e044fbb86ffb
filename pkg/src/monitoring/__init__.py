from src.monitoring.monitor import (
    EpochMetrics,
    EpochTiming,
    MetricLog,
    format_epoch_summary,
    layer_usage_pvalue,
    load_events,
    log_event,
    print_run_report,
)

__all__ = [
    "EpochMetrics",
    "EpochTiming",
    "MetricLog",
    "format_epoch_summary",
    "layer_usage_pvalue",
    "load_events",
    "log_event",
    "print_run_report",
]
