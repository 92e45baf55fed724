from .model import *
from .loss import *
