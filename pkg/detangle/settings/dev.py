from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

SECRET_KEY = "detangle-insecure-dev-key"

# debug turns on the invariant assertions inside the solver
DEBUG = True

LOG_LEVEL = 'DEBUG'

THREADS = 1

SEED = 0
