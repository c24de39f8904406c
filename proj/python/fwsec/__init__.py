"""fwsec: LLM firmware security validation and patching pipeline."""

try:
    from ._fwsec import *  # noqa: F401,F403
    from ._fwsec import __version__  # noqa: F401
except ImportError:  # build-tree layout: the extension sits directly on sys.path
    from _fwsec import *  # noqa: F401,F403
    from _fwsec import __version__  # noqa: F401
