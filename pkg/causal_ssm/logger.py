import dataclasses
import json
import threading
from enum import StrEnum
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Union

from causal_ssm.utils import EnhancedJSONEncoder


class LogEntryStatus(StrEnum):
    """
    Severity of a log message
    """

    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


@dataclasses.dataclass
class LogEntry:
    """
    One message of the run log

    Attributes:
        status (LogEntryStatus): Severity of the message.
        message (str): The message text.
    """

    status: LogEntryStatus
    message: str


@dataclasses.dataclass
class RunLog:
    """
    Everything recorded while a command runs, dumped as its run manifest

    Attributes:
        command (Optional[str]): Name of the command being executed.
        seed (Optional[int]): Root random seed of the run.
        config (Optional[Dict[str, Any]]): Resolved run configuration.
        entries (Dict[str, List[LogEntry]]): Messages grouped by stage, job or store identifier.
    """

    command: Optional[str] = None
    seed: Optional[int] = None
    config: Optional[Dict[str, Any]] = None

    entries: Dict[str, List[LogEntry]] = dataclasses.field(default_factory=dict)


class Logger:
    """
    Process wide buffered logger, one message list per entry.

    Fits running in worker threads log concurrently, so every entry should belong to a
    single job for the message order to be reproducible.
    """

    enabled: ClassVar[bool] = True
    log_buffer: ClassVar[RunLog] = RunLog()
    _lock: ClassVar[threading.Lock] = threading.Lock()

    @staticmethod
    def disable() -> None:
        Logger.enabled = False

    @staticmethod
    def enable() -> None:
        Logger.enabled = True

    @staticmethod
    def reset() -> None:
        with Logger._lock:
            Logger.log_buffer = RunLog()

    @staticmethod
    def start_run(command: str, seed: Optional[int], config: Any) -> None:
        """
        Record the command, seed and resolved configuration of the current run

        Args:
            command (str): Command name.
            seed (Optional[int]): Root seed.
            config (Any): Configuration dataclass or mapping, stored in its JSON form.
        """

        with Logger._lock:
            Logger.log_buffer.command = command
            Logger.log_buffer.seed = seed
            Logger.log_buffer.config = json.loads(json.dumps(config, cls=EnhancedJSONEncoder))

    @staticmethod
    def log(entry: str, message: str, level: LogEntryStatus) -> None:
        if not Logger.enabled:
            return

        with Logger._lock:
            Logger.log_buffer.entries.setdefault(entry, []).append(LogEntry(level, message))

    @staticmethod
    def info(entry: str, message: str) -> None:
        Logger.log(entry, message, LogEntryStatus.INFO)

    @staticmethod
    def warning(entry: str, message: str) -> None:
        Logger.log(entry, message, LogEntryStatus.WARNING)

    @staticmethod
    def error(entry: str, message: str) -> None:
        Logger.log(entry, message, LogEntryStatus.ERROR)

    @staticmethod
    def messages(entry: str, level: Optional[LogEntryStatus] = None) -> List[str]:
        with Logger._lock:
            logs = list(Logger.log_buffer.entries.get(entry, []))
        return [log.message for log in logs if level is None or log.status == level]

    @staticmethod
    def dump(file_name: Union[str, Path]) -> None:
        """
        Write the run log as indented JSON with sorted keys

        Args:
            file_name (Union[str, Path]): Manifest file, overwritten.
        """

        with Logger._lock:
            data = dataclasses.asdict(Logger.log_buffer)
        content = json.dumps(data, indent=4, sort_keys=True, cls=EnhancedJSONEncoder)
        with open(file_name, "w", encoding="utf-8", newline="\n") as log_file:
            log_file.write(content)
