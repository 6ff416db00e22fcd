from ._version import __version__
from .api import *
from .cli import entrypoint, run
from .config import *
from .errors import *
from .euler_apps import *
from .floquet import *
from .integrator import *
from .lie_core import *
from .phases import *
from .selftest import run_selftest
