import datetime
import logging
import pathlib
import sys
from typing import IO, Optional

import numpy as np
import rapidjson
import structlog

# Verbosity (count of '-v's) to the lowest level that's shown.
_LEVELS = {0: logging.WARNING, 1: logging.INFO}

# Arrays bigger than this are summarised in log events, not written out.
_MAX_LOGGED_ARRAY = 16


def init_logging(
    output_file: Optional[IO] = None,
    verbosity: int = 0,
    cache_logger_on_first_use=True,
):
    """
    Setup structlog for structured logging output.

    This defaults to stdout as it's the parseable json output of the program.
    Progress messages meant for a human go to stderr (see ``emrates.lab``).
    """
    if output_file is None:
        output_file = sys.stdout

    structlog.configure(
        processors=[
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="ISO"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            summarise_arrays,
            _renderer(output_file),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            _LEVELS.get(verbosity, logging.DEBUG)
        ),
        context_class=dict,
        cache_logger_on_first_use=cache_logger_on_first_use,
        logger_factory=structlog.PrintLoggerFactory(file=output_file),
    )


def _renderer(output_file: IO):
    # Coloured output if to terminal, otherwise json
    if output_file.isatty():
        return structlog.dev.ConsoleRenderer()

    # Note that we can't use functools.partial: JSONRenderer will pass its
    # own 'default' property that overrides our own.
    def lenient_json_dump(obj, *args, **kwargs):
        return rapidjson.dumps(
            obj,
            datetime_mode=rapidjson.DM_ISO8601,
            number_mode=rapidjson.NM_NATIVE | rapidjson.NM_NAN,
            sort_keys=True,
            default=lenient_json_fallback,
        )

    return structlog.processors.JSONRenderer(serializer=lenient_json_dump)


def summarise_arrays(logger, log_method, event_dict):
    """
    Replace numpy values in an event with plain Python ones.

    Whole lattices and trajectories sometimes get bound to a logger; only
    their shape is worth a log line.

    >>> summarise_arrays(None, "info", {"errors": np.array([0.5, 0.25])})
    {'errors': [0.5, 0.25]}
    >>> summarise_arrays(None, "info", {"states": np.zeros((100, 1025))})
    {'states': 'array(shape=(100, 1025), dtype=float64)'}
    >>> summarise_arrays(None, "info", {"order": np.float64(0.75)})
    {'order': 0.75}
    """
    for key, value in event_dict.items():
        if isinstance(value, np.ndarray):
            if value.size > _MAX_LOGGED_ARRAY:
                event_dict[key] = f"array(shape={value.shape}, dtype={value.dtype})"
            else:
                event_dict[key] = value.tolist()
        elif isinstance(value, np.generic):
            event_dict[key] = value.item()
    return event_dict


def lenient_json_fallback(obj):
    """
    JSON for anything a log event carries: an event is never lost to a value
    that won't serialise.

    >>> lenient_json_fallback(pathlib.Path("results/ou_oracle.csv"))
    'results/ou_oracle.csv'
    >>> lenient_json_fallback({3, 1})
    [1, 3]
    """
    if isinstance(obj, (datetime.datetime, datetime.date)):
        return obj.isoformat()

    if isinstance(obj, pathlib.Path):
        return str(obj)

    if isinstance(obj, (set, frozenset)):
        return sorted(obj)

    # Nested inside lists, where summarise_arrays doesn't look.
    if isinstance(obj, np.generic):
        return obj.item()

    # Enums (experiment kinds, assumption profiles) log as their values.
    value = getattr(obj, "value", None)
    if isinstance(value, (str, int, float)):
        return value

    return repr(obj)
