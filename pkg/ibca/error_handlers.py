import logging

log = logging.getLogger(__name__)

CONFIGURATION_ERROR = 2
RUNTIME_ERROR = 3

_handlers = {}


class CustomException(Exception):
    def __init__(self, message, exit_code=RUNTIME_ERROR, debug=None):
        Exception.__init__(self, message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.debug = debug

    def to_dict(self):
        return {
            'error': {
                'message': self.message,
                'code': self.exit_code,
                'debug': dict(self.debug or ())
            }
        }


class ConfigurationException(CustomException):
    """
    Use this exception for invalid configuration values, overrides or
    mismatched checkpoint/dataset settings
    """
    def __init__(self, message, exit_code=CONFIGURATION_ERROR, debug=None):
        CustomException.__init__(self, message, exit_code, debug)


class DataException(CustomException):
    """
    Use this exception for unreadable or malformed manifests and images
    """
    def __init__(self, message, exit_code=CONFIGURATION_ERROR, debug=None):
        CustomException.__init__(self, message, exit_code, debug)


class ShapeException(CustomException):
    """
    Use this exception when tensor shapes violate the token layout
    """
    def __init__(self, message, exit_code=RUNTIME_ERROR, debug=None):
        CustomException.__init__(self, message, exit_code, debug)


class NumericalException(CustomException):
    """
    Use this exception for non-finite activations or losses
    """
    def __init__(self, message, exit_code=RUNTIME_ERROR, debug=None):
        CustomException.__init__(self, message, exit_code, debug)


class DomainException(CustomException):
    """
    Use this exception when an argument lies outside a function's domain
    """
    def __init__(self, message, exit_code=RUNTIME_ERROR, debug=None):
        CustomException.__init__(self, message, exit_code, debug)


def errorhandler(exception_type):
    """
    Register a handler returning the process exit code for an exception type
    """
    def decorator(func):
        _handlers[exception_type] = func
        return func
    return decorator


def handle_exception(e):
    """
    Dispatch to the most specific registered handler along the MRO
    """
    for klass in type(e).__mro__:
        if klass in _handlers:
            return _handlers[klass](e)
    return default_error_handler(e)


def default_error_handler(e):
    """
    Default error handler
    """
    message = 'An exception occurred: {}'.format(e)
    log.exception(message)
    return RUNTIME_ERROR


@errorhandler(CustomException)
def custom_exception_handler(e):
    """
    Error handler for every CustomException subclass
    """
    log.error(e.message)
    if e.debug:
        log.error("details: {}".format(dict(e.debug)))
    return e.exit_code


@errorhandler(FileNotFoundError)
def file_not_found_handler(e):
    """
    Error handler for missing input files
    """
    log.error('No such file: {}'.format(e.filename))
    return CONFIGURATION_ERROR
