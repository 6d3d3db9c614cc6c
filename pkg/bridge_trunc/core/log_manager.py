"""
Run log: captured log records plus one detailed entry per experiment or
probe, exportable as text, JSON or CSV
"""
import io
import json
import logging
import threading
from datetime import datetime
from typing import Any, Dict, List

import pandas as pd

from .errors import ConfigError

EXPORT_FORMATS = ("text", "json", "csv")


class LogManager:
    """Collects the run log of one CLI invocation or API process"""

    def __init__(self):
        self.session_logs: List[Dict[str, Any]] = []
        self.detailed_logs: List[Dict[str, Any]] = []
        self._lock = threading.Lock()

    def add_session_log(self, message: str, level: str = "INFO"):
        with self._lock:
            self.session_logs.append({
                "timestamp": datetime.now().isoformat(),
                "level": level,
                "message": message,
            })

    def add_detailed_log(self, operation: str, details: Dict[str, Any]):
        with self._lock:
            self.detailed_logs.append({
                "timestamp": datetime.now().isoformat(),
                "operation": operation,
                "details": details,
            })

    def record_report(self, operation: str, report) -> None:
        """Detailed entry for an experiment or probe report, including its runtime"""
        details = {
            "verdict": getattr(report, "verdict", None),
            "runtime_seconds": round(getattr(report, "runtime_seconds", 0.0), 3),
        }
        config = getattr(report, "config", None)
        if config is not None:
            details.update({
                "statistic": config.statistic.value,
                "ensemble": config.ensemble.value,
                "n": config.n,
                "replicates": config.replicates,
                "mode": config.mode.value,
                "seed": config.master_seed,
            })
        else:
            details.update({"probe": report.probe, "ensemble": report.ensemble.value,
                            "replicates": report.replicates, "seed": report.seed})
        if getattr(report, "max_abs_z", None) is not None:
            details["max_abs_z"] = round(report.max_abs_z, 4)
        self.add_detailed_log(operation, details)

    def export_logs_as_text(self) -> str:
        output = [
            "=" * 72,
            "BRIDGE-TRUNC RUN LOG",
            "=" * 72,
            f"Export Date: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}",
            f"Log records: {len(self.session_logs)}",
            f"Runs: {len(self.detailed_logs)}",
            "",
            "LOG RECORDS:",
            "-" * 40,
        ]
        for log in self.session_logs:
            timestamp = log["timestamp"][:19].replace("T", " ")
            output.append(f"[{timestamp}] {log['level']}: {log['message']}")
        output += ["", "RUNS:", "-" * 40]
        for log in self.detailed_logs:
            timestamp = log["timestamp"][:19].replace("T", " ")
            output.append(f"[{timestamp}] {log['operation']}:")
            output.extend(f"  {key}: {value}" for key, value in log["details"].items())
            output.append("")
        return "\n".join(output)

    def export_logs_as_json(self) -> str:
        return json.dumps({
            "export_info": {
                "tool": "bridge-trunc",
                "export_date": datetime.now().isoformat(),
                "log_records": len(self.session_logs),
                "runs": len(self.detailed_logs),
            },
            "session_logs": self.session_logs,
            "detailed_logs": self.detailed_logs,
        }, indent=2, default=str)

    def export_logs_as_csv(self) -> str:
        rows = [{
            "timestamp": log["timestamp"], "type": "RECORD", "level": log["level"],
            "operation": "", "message": log["message"], "details": "",
        } for log in self.session_logs]
        rows += [{
            "timestamp": log["timestamp"], "type": "RUN", "level": "INFO",
            "operation": log["operation"], "message": "",
            "details": "; ".join(f"{k}={v}" for k, v in log["details"].items()),
        } for log in self.detailed_logs]
        columns = ["timestamp", "type", "level", "operation", "message", "details"]
        frame = pd.DataFrame(rows, columns=columns).sort_values("timestamp", kind="stable")
        output = io.StringIO()
        frame.to_csv(output, index=False)
        return output.getvalue()

    def export(self, fmt: str) -> str:
        if fmt not in EXPORT_FORMATS:
            raise ConfigError(f"unknown log format '{fmt}'; choose from {', '.join(EXPORT_FORMATS)}")
        return {"text": self.export_logs_as_text,
                "json": self.export_logs_as_json,
                "csv": self.export_logs_as_csv}[fmt]()

    def clear_logs(self):
        with self._lock:
            self.session_logs.clear()
            self.detailed_logs.clear()

    def get_log_summary(self) -> Dict[str, Any]:
        return {
            "session_logs_count": len(self.session_logs),
            "detailed_logs_count": len(self.detailed_logs),
            "latest_session_log": self.session_logs[-1] if self.session_logs else None,
            "latest_detailed_log": self.detailed_logs[-1] if self.detailed_logs else None,
        }


log_manager = LogManager()


class RunLogHandler(logging.Handler):
    """Forwards log records into the run log"""

    def emit(self, record):
        try:
            log_manager.add_session_log(self.format(record), record.levelname)
        except Exception:
            self.handleError(record)


def setup_log_capture(level: int = logging.INFO) -> RunLogHandler:
    """Attach the run-log handler to the root logger once"""
    root_logger = logging.getLogger()
    for handler in root_logger.handlers:
        if isinstance(handler, RunLogHandler):
            return handler
    handler = RunLogHandler()
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(name)s - %(message)s"))
    root_logger.addHandler(handler)
    return handler
