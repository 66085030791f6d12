#!/usr/bin/env python
"""Same launcher as `python -m detangle`, kept for the usual Django workflow."""
from detangle.__main__ import main


if __name__ == '__main__':
    main()
