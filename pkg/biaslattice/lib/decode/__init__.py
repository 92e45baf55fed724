from .trie import *
from .search import *
from .runner import *
