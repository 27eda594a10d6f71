"""
异常日志记录类
命令失败时把异常类型、消息、退出码、堆栈与运行上下文以 JSON 记录追加到 <output>/logs/exceptions_YYYY-MM-DD.log
"""

import json
import os
import traceback
from datetime import datetime
from typing import Any, Dict, Optional

from loguru import logger

_SEPARATOR = "-" * 80


class ExceptionHandler:
    """异常处理器，负责记录异常日志"""

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = base_dir or os.getcwd()
        self.log_dir = os.path.join(self.base_dir, "logs")
        os.makedirs(self.log_dir, exist_ok=True)

    def _log_file(self) -> str:
        return os.path.join(self.log_dir, f"exceptions_{datetime.now().strftime('%Y-%m-%d')}.log")

    def log_exception(self, exception: BaseException, context: Optional[Dict[str, Any]] = None) -> str:
        """
        记录异常到日志文件

        Args:
            exception: 异常对象
            context: 命令、配置路径、阶段等上下文

        Returns:
            异常日志ID
        """
        exception_id = f"EXC_{datetime.now().strftime('%Y%m%d_%H%M%S_%f')}"
        exception_info = {
            "exception_id": exception_id,
            "timestamp": datetime.now().isoformat(),
            "exception_type": type(exception).__name__,
            "exception_message": str(exception),
            "exit_code": getattr(exception, "exit_code", 1),
            "stage": getattr(exception, "stage", None),
            "sweep": getattr(exception, "sweep", None),
            "traceback": "".join(traceback.format_exception(type(exception), exception, exception.__traceback__)),
            "context": context or {},
        }
        self._write_to_log(exception_info)
        logger.error(f"异常发生: {exception_info['exception_type']} - {exception_info['exception_message']}")
        return exception_id

    def _write_to_log(self, exception_info: Dict[str, Any]) -> None:
        try:
            with open(self._log_file(), "a", encoding="utf-8") as f:
                f.write(json.dumps(exception_info, ensure_ascii=False, indent=2, default=str) + "\n")
                f.write(_SEPARATOR + "\n")
        except OSError as e:
            logger.error(f"写入异常日志失败: {e}")

