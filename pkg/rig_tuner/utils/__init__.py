from .file_access import array_fingerprint, csv_cell, read_json, reject_unknown_fields, write_json
from .signal_to_log import connect_all_signals_to_logger, connect_signal_emit_values_to_logger

__all__ = [
    "array_fingerprint",
    "connect_all_signals_to_logger",
    "connect_signal_emit_values_to_logger",
    "csv_cell",
    "read_json",
    "reject_unknown_fields",
    "write_json",
]
