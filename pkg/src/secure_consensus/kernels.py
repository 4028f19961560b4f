"""Backend selection for the big-integer kernels.

The GMP-backed extension is used when it was built; otherwise the pure-Python
module is used. Set ``SECURE_CONSENSUS_PURE_PYTHON=1`` to force the fallback.
Both backends return bit-identical results.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def load_backend(name: str) -> ModuleType:
    """Return the kernel module called ``name`` ("gmp" or "python")."""
    if name == "python":
        return _pykernels
    if name == "gmp":
        from . import _ckernels  # noqa: PLC0415

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("gmp")
    except ImportError:
        pass
    else:
        names.insert(0, "gmp")
    return names


def _select() -> ModuleType:
    if os.environ.get("SECURE_CONSENSUS_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    try:
        return load_backend("gmp")
    except ImportError:
        return _pykernels


def use_backend(name: str) -> None:
    """Switch the process-wide backend; callers go through this module's attributes."""
    global BACKEND, powmod, paillier_encrypt, paillier_decrypt, miller_rabin
    mod = load_backend(name)
    BACKEND = mod.BACKEND
    powmod = mod.powmod
    paillier_encrypt = mod.paillier_encrypt
    paillier_decrypt = mod.paillier_decrypt
    miller_rabin = mod.miller_rabin


_active = _select()

BACKEND: str = _active.BACKEND
powmod = _active.powmod
paillier_encrypt = _active.paillier_encrypt
paillier_decrypt = _active.paillier_decrypt
miller_rabin = _active.miller_rabin
