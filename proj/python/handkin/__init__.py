from ._handkin import *  # noqa: F401,F403
from ._handkin import __version__  # noqa: F401
