"""Kernel backend selection.

The t-SNE inner loops (per-point perplexity search, embedding gradient)
are the one place in this package where Python-level looping, not BLAS,
dominates, so they exist twice: a compiled Cython extension and a pure
numpy fallback with identical semantics. The compiled backend is picked
at import when available; set FIELDVAE_KERNELS=numpy|cython to force one
(forcing cython raises if the extension is missing).
benchmarks/bench_tsne.py compares the two.
"""

from __future__ import annotations

import os

from . import numpy_impl

_requested = os.environ.get("FIELDVAE_KERNELS", "auto").lower()
_compiled = None
if _requested in ("auto", "cython"):
    try:
        from . import tsne_core as _compiled  # type: ignore[attr-defined]
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "FIELDVAE_KERNELS=cython but the compiled extension is not "
                "built; reinstall the package or use FIELDVAE_KERNELS=numpy")
elif _requested not in ("numpy", "python"):
    raise ImportError(f"FIELDVAE_KERNELS={_requested!r} not recognized "
                      "(use auto, cython, or numpy)")

if _compiled is not None:
    BACKEND = "cython"
    conditional_probs = _compiled.conditional_probs
    kl_grad = _compiled.kl_grad
else:
    BACKEND = "numpy"
    conditional_probs = numpy_impl.conditional_probs
    kl_grad = numpy_impl.kl_grad
