import copy
import os

THREADS_ENV = "MEDFPCA_THREADS"


def deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_env_overrides(raw: dict, environ: dict[str, str] | None = None) -> dict:
    """环境变量覆盖配置（MEDFPCA_THREADS 优先于配置文件中的 threads）。"""
    env = os.environ if environ is None else environ
    value = (env.get(THREADS_ENV) or "").strip()
    if not value:
        return raw
    merged = dict(raw)
    # 保留原始字符串，交由 pydantic 校验并报出 threads 字段错误
    merged["threads"] = int(value) if value.lstrip("-").isdigit() else value
    return merged
