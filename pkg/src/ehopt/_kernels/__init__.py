"""Kernel implementation selection.

The compiled extension is preferred; EHOPT_KERNEL=python forces the
pure-Python twin (useful for the equivalence tests and the benchmark).
"""
import os

if os.environ.get("EHOPT_KERNEL", "").lower() == "python":
    from . import _fallback as impl
else:
    try:
        from . import _speedups as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as impl

IS_COMPILED = impl.IS_COMPILED
LP_OPTIMAL = impl.LP_OPTIMAL
LP_UNBOUNDED = impl.LP_UNBOUNDED
LP_ITER_LIMIT = impl.LP_ITER_LIMIT
lp_pivot_loop = impl.lp_pivot_loop
q_learn_chunk = impl.q_learn_chunk
r_learn_chunk = impl.r_learn_chunk
