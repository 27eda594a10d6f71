import hashlib

import numpy as np


def derive_seed(master_seed: int, *purpose: object) -> int:
    """
    由主种子和用途字符串派生子种子。
    对 "master:purpose/..." 做 sha256 并截取 63 位，保证同一输入在任何机器上结果一致。
    """
    key = f"{int(master_seed)}:" + "/".join(str(p) for p in purpose)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def make_rng(master_seed: int, *purpose: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *purpose))
