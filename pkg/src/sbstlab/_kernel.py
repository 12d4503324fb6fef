"""Select the compiled kernel when available, else the pure-Python one.

Set ``SBSTLAB_PURE=1`` to force the fallback.
"""

import os

from . import _pykernel

if os.environ.get("SBSTLAB_PURE", "") not in ("", "0"):
    impl = _pykernel
    BACKEND = "python"
else:
    try:
        from . import _ckernel as impl
    except ImportError:  # extension not built
        impl = _pykernel
        BACKEND = "python"
    else:
        BACKEND = "cython"

run_case = impl.run_case
run_suite = impl.run_suite
run_suites_coverage = impl.run_suites_coverage
count_map = impl.count_map
