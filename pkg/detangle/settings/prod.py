import os
from dotenv import load_dotenv
from pathlib import Path

# load .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

SECRET_KEY = os.getenv('DETANGLE_SECRET_KEY', 'detangle-offline-cli')

DEBUG = os.getenv('DETANGLE_DEBUG', '0') == '1'

LOG_LEVEL = os.getenv('DETANGLE_LOG', 'INFO').upper()

# worker threads for branch and bound nodes and per-image work
THREADS = int(os.getenv('DETANGLE_THREADS', '1'))

# default seed of every randomized generator
SEED = int(os.getenv('DETANGLE_SEED', '0'))
