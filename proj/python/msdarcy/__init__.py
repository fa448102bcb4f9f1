"""Multiscale expanded mixed finite elements for Darcy flow.

The heavy lifting happens in the compiled extension ``_msdarcy``; this package
re-exports its functions.  Every entry point takes a flat ``dict[str, str]``
configuration (the same keys accepted by the ``msdarcy`` command-line tool and
its config files) and fills in canonical defaults for anything omitted.

>>> import msdarcy
>>> cfg = msdarcy.default_config("homog-check")
>>> cfg["fine"] = "16,16,16"
>>> result = msdarcy.homog_check(cfg)
>>> result["entries"][1]["field"]
'laminate'
"""

from ._msdarcy import (
    MsdarcyConfigError,
    MsdarcyDomainError,
    MsdarcySolverError,
    __version__,
    convergence,
    default_config,
    homog_check,
    impes,
    run,
    table,
)

__all__ = [
    "MsdarcyConfigError",
    "MsdarcyDomainError",
    "MsdarcySolverError",
    "__version__",
    "convergence",
    "default_config",
    "homog_check",
    "impes",
    "run",
    "table",
]
