class DetangleError(Exception):
    """Base class of every error raised by the detangle apps."""
