"""Event-engine dispatch: compiled kernel when available, Python otherwise.

Set ``MESS_ENGINE=python`` to force the pure-Python engine.  Devices without a
``_kernel_spec`` (or whose spec is ``None``) always run on the Python engine.
"""

from __future__ import annotations

import os
from typing import List, Optional

from . import _engine
from ._engine import EngineResult, Issuer, IssuerStats, Recording

try:
    from . import _kernel
except ImportError:  # extension not built
    _kernel = None

HAVE_KERNEL = _kernel is not None


def default_engine() -> str:
    choice = os.environ.get("MESS_ENGINE", "").strip().lower()
    if choice == "python" or not HAVE_KERNEL:
        return "python"
    return "compiled"


def run(issuers: List[Issuer], device, frequency_ghz: float, line_size: int = 64,
        warmup_ops: int = 0, engine: Optional[str] = None) -> EngineResult:
    engine = engine or default_engine()
    if engine not in ("python", "compiled"):
        raise ValueError(f"unknown engine {engine!r}")
    spec = device._kernel_spec() if hasattr(device, "_kernel_spec") else None
    if engine == "compiled" and spec is not None:
        if not HAVE_KERNEL:
            raise RuntimeError("compiled engine requested but mess._kernel is not built")
        kind, params, state = spec
        total, end_cycle, stats, recs, dev_state = _kernel.run(
            issuers, kind, params, state, frequency_ghz, line_size, warmup_ops
        )
        device._kernel_restore(dev_state)
        return EngineResult(
            total,
            end_cycle,
            [IssuerStats(*s) for s in stats],
            {i: Recording(*r) for i, r in recs.items()},
        )
    return _engine.run(issuers, device, frequency_ghz, line_size, warmup_ops)
