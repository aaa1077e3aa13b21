"""Hot-kernel dispatch.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
pure-Python ``_pykernels`` module is used.  Set ``MTSKETCH_PURE_PYTHON=1`` to
force the fallback.
"""

import os

if os.environ.get("MTSKETCH_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import BACKEND, merge_sweep, prim_mst, transport_simplex, tree_distances
else:
    try:
        from ._ckernels import BACKEND, merge_sweep, prim_mst, transport_simplex, tree_distances
    except ImportError:  # extension not built
        from ._pykernels import BACKEND, merge_sweep, prim_mst, transport_simplex, tree_distances

__all__ = ["BACKEND", "merge_sweep", "prim_mst", "transport_simplex", "tree_distances"]
