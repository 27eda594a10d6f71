"""
导出运行配置的 JSON Schema 到 config/run_config.schema.json。

用法: python -m scripts.export_config_schema [输出路径]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from loguru import logger

_ROOT = Path(__file__).resolve().parents[1]
if str(_ROOT) not in sys.path:
    sys.path.insert(0, str(_ROOT))

from core.run_config import RunConfig  # noqa: E402

DEFAULT_PATH = _ROOT / "config" / "run_config.schema.json"


def export_schema(path: Path = DEFAULT_PATH) -> Path:
    schema = RunConfig.model_json_schema(by_alias=True)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(schema, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    logger.info(f"配置 schema 已写入: {path}")
    return path


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    export_schema(Path(argv[0]) if argv else DEFAULT_PATH)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
