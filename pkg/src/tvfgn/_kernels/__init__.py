"""Backend selection for the Levinson hot kernels.

Prefers the compiled Cython extension; falls back to the pure-numpy
implementation when the extension is missing or TVFGN_PURE_PYTHON is set.
"""

import os

if os.environ.get("TVFGN_PURE_PYTHON"):
    from tvfgn._kernels._levinson_py import (  # noqa: F401
        durbin_logdet,
        durbin_quadform,
        durbin_whitening,
    )

    BACKEND = "python"
else:
    try:
        from tvfgn._kernels._levinson import (  # noqa: F401
            durbin_logdet,
            durbin_quadform,
            durbin_whitening,
        )

        BACKEND = "cython"
    except ImportError:
        from tvfgn._kernels._levinson_py import (  # noqa: F401
            durbin_logdet,
            durbin_quadform,
            durbin_whitening,
        )

        BACKEND = "python"
