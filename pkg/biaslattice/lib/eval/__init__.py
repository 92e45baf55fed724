from .metrics import *
from .report import *
