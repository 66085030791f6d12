#!/usr/bin/env python
"""The detangle command line: `python -m detangle {gen,parse,assemble,eval,learn}`."""
import os
import sys


def main():
    """Run a detangle management command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'detangle.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    argv = list(sys.argv)
    argv[0] = 'detangle'
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()
