from .synth import *
from .corpus import *
