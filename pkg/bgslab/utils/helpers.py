import hashlib
import math

import numpy as np

SEED_MASK = (1 << 64) - 1


def stable_hash(*parts: object) -> int:
    """64-bit blake2b digest of the joined parts; identical across processes and platforms."""
    text = "\x1f".join(str(part) for part in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, *parts: object) -> int:
    """seed XOR stable-hash(parts), folded to 64 bits."""
    return (int(seed) ^ stable_hash(*parts)) & SEED_MASK


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & SEED_MASK))


def encode_float(value: float) -> str:
    """Text form used in CSV and JSON: NaN, Inf, -Inf or the shortest round-trip repr."""
    value = float(value)
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return repr(value)


def parse_sweep(text: str) -> list[float]:
    """Parse 'a:b', 'a:step:b' (inclusive, MATLAB style) or 'a,b,c'."""
    text = str(text).strip()
    if not text:
        return []
    if ":" in text:
        parts = [float(part) for part in text.split(":")]
        if len(parts) == 2:
            start, step, stop = parts[0], 1.0, parts[1]
        elif len(parts) == 3:
            start, step, stop = parts
        else:
            raise ValueError(f"bad sweep {text!r}")
        if step == 0:
            raise ValueError("sweep step must be nonzero")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(count, 0))]
    return [float(part) for part in text.split(",") if part.strip()]


def split_names(value: str | list | tuple | None) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(item).strip() for item in value if str(item).strip()]
    return [item.strip() for item in str(value).split(",") if item.strip()]
