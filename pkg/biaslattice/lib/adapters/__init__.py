from .catalog import *
from .contextual import *
