"""Shared plumbing of the detangle management commands."""
import json
import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from .exceptions import DetangleError

logger = logging.getLogger(__name__)

# exit status of a solve that stopped with a remaining optimality gap
GAP_REMAINING = 3


def read_json(path):
    with open(path) as stream:
        return json.load(stream)


def write_json(path, document):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as stream:
        json.dump(document, stream, indent=1)
    logger.debug("wrote %s", path)


def load_params(path=None):
    from assembly.models import Params
    base = Params.from_settings()
    return base if path is None else Params.from_dict(read_json(path), base=base)


def load_anthro(path=None):
    from semantics.models import ReferenceAnthropometry
    base = ReferenceAnthropometry.from_settings()
    return base if path is None else ReferenceAnthropometry.from_dict(read_json(path), base=base)


class DetangleCommand(BaseCommand):
    """Reports domain, file and schema errors as CommandError."""

    def add_params_arguments(self, parser):
        parser.add_argument('--params', help='JSON document overriding the objective weights')
        parser.add_argument('--anthro', help='JSON document overriding the reference anthropometry')

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except (DetangleError, OSError, ValueError, KeyError) as error:
            logger.error("%s failed: %s", self.__module__.rsplit(".", 1)[-1], error)
            raise CommandError(f"{type(error).__name__}: {error}") from error
