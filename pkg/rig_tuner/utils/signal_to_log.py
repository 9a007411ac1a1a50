import logging

from undo_stack import Signal, SignalContainer


def connect_signal_emit_values_to_logger(
    signal: Signal, logger: logging.Logger, *, level=logging.DEBUG, prefix=""
):
    name = prefix + signal.name

    def inner(*args, **_):
        if len(args) == 1:
            args = args[0]
        logger.log(level, "%s: %s", name, args)

    signal.connect(inner)
    return inner


def connect_all_signals_to_logger(
    signal_container: SignalContainer,
    logger: logging.Logger | None = None,
    *,
    level=logging.DEBUG,
):
    """
    Forward every value-carrying signal of the container to the logger.
    Returns the connected callbacks so they can be disconnected.
    """
    logger = logger or logging.getLogger(type(signal_container).__module__)
    return [
        connect_signal_emit_values_to_logger(signal, logger, level=level)
        for signal in signal_container.signals()
        if len(signal.type_info) > 0
    ]
