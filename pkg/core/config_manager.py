import json
import os

from loguru import logger
from pydantic import ValidationError

from core.errors import ConfigError, DataIOError
from core.run_config import RunConfig
from core.settings_service import apply_env_overrides, deep_merge


def format_validation_error(exc: ValidationError) -> ConfigError:
    """取第一条 pydantic 错误，转换成 `sim.sigma_m: ...` 形式的 ConfigError。"""
    first = exc.errors()[0]
    path = ".".join(str(p) for p in first.get("loc", ())) or "<root>"
    return ConfigError(path, first.get("msg", "invalid value"))


class ConfigManager:
    """配置管理类，负责运行配置的读取、校验以及输出/日志目录。"""

    def __init__(self, base_dir: str | None = None, *, log_to_file: bool = True):
        self.base_dir = base_dir or os.getcwd()
        self.log_dir = os.path.join(self.base_dir, "logs")
        self.default_settings: dict = RunConfig().model_dump(by_alias=True)
        self._sink_id: int | None = None

        os.makedirs(self.base_dir, exist_ok=True)
        if log_to_file:
            os.makedirs(self.log_dir, exist_ok=True)
            self._setup_logger()

    def _setup_logger(self) -> None:
        self._sink_id = logger.add(
            os.path.join(self.log_dir, "medfpca_{time:YYYY-MM-DD}.log"),
            rotation="1 day",
            retention="7 days",
            level="INFO",
            format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}",
            encoding="utf-8",
        )

    def close(self) -> None:
        if self._sink_id is not None:
            logger.remove(self._sink_id)
            self._sink_id = None

    @staticmethod
    def read_json(path: str) -> dict:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise DataIOError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"invalid JSON at line {e.lineno}: {e.msg}") from e
        except OSError as e:
            raise DataIOError(f"cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        return data

    @staticmethod
    def validate(raw: dict, environ: dict[str, str] | None = None) -> RunConfig:
        try:
            return RunConfig.model_validate(apply_env_overrides(raw, environ))
        except ValidationError as e:
            raise format_validation_error(e) from e

    def resolved_settings(self, cfg: RunConfig) -> dict:
        """完整解析后的配置（默认值深合并），写入 manifest。"""
        return deep_merge(self.default_settings, cfg.model_dump(mode="json", by_alias=True))
