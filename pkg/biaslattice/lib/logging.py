import logging
import sys

from colorama import init, Fore, Style

_FORMAT = "%(asctime)s %(levelname)8s %(message)s"
_DATEFMT = "%H:%M:%S %Y/%m/%d"
_COLORS = {
    logging.WARNING: Fore.MAGENTA,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.RED,
}
_SETUP = False


class ColorFormatter(logging.Formatter):
    '''
    Formatter that wraps warning and failure records in terminal
    colors.  Only installed on stream handlers; log files stay plain.
    '''
    def format(self, record):
        msg = logging.Formatter.format(self, record)
        color = _COLORS.get(record.levelno)
        if color is None:
            return msg
        return color + msg + Style.RESET_ALL


def setup_logging(debug, logfile=None):
    '''
    Setup logging format and log level.
    '''
    global _SETUP
    if debug:
        level = logging.DEBUG
    else:
        level = logging.INFO
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    if logfile is not None:
        handler = logging.FileHandler(logfile)
        handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATEFMT))
    else:
        if not _SETUP:
            init(strip=(sys.platform == 'win32'), convert=(sys.platform == 'win32'))
        handler = logging.StreamHandler()
        handler.setFormatter(ColorFormatter(_FORMAT, datefmt=_DATEFMT))
    root.addHandler(handler)
    root.setLevel(level)
    _SETUP = True


def log_failure(s):
    '''Convenience function for failure message.'''
    logging.fatal("{}".format(s))

def log_debug(s):
    '''Convenience function for debugging message.'''
    logging.debug("{}".format(s))

def log_warn(s):
    '''Convenience function for warning message.'''
    logging.warning("{}".format(s))

def log_info(s):
    '''Convenience function for info message.'''
    logging.info("{}".format(s))
