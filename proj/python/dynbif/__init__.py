from ._dynbif import *  # noqa: F401,F403
from ._dynbif import Error, IOError, NumericError, ValidationError, __doc__  # noqa: F401
