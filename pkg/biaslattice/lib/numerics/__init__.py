from .tensor import *
from .gradcheck import *
from . import ops
from . import layers
