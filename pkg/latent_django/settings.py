"""
Django settings for latent_django project - a command-line decoding engine,
no database and no HTTP surface.
"""

import os
import sys
from pathlib import Path
from dotenv import load_dotenv
import logging

# Load environment variables from .env file (if present)
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Configure simple logging; diagnostics go to stderr, data to files/stdout
logger = logging.getLogger("general_logger")
logger.setLevel(os.getenv("LOG_LEVEL", "INFO"))
if not logger.handlers:
    handler = logging.StreamHandler(sys.stderr)
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    handler.setFormatter(formatter)
    logger.addHandler(handler)
logger.propagate = False

SECRET_KEY = os.getenv("SECRET_KEY", "django-insecure-default-key-for-development")
DEBUG = False

# Application definition
INSTALLED_APPS = [
    'latent.apps.LatentConfig',
]

# Nothing is persisted in a database; memory files are the only storage
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

# Engine defaults. Precedence: command-line flags > --config file > these.
LATENT_DEFAULTS = {
    'mode': os.getenv('L2D_MODE', 'global'),
    'K': int(os.getenv('L2D_K', '20')),
    'M': int(os.environ['L2D_M']) if os.getenv('L2D_M') else None,
    'backfill': os.getenv('L2D_BACKFILL', 'global-backfill'),
    'epsilon': float(os.getenv('L2D_EPSILON', '1e-9')),
    'Ks': os.getenv('L2D_KS', '20,50,100'),
    'threshold': int(os.getenv('L2D_THRESHOLD', '5')),
    'threads': int(os.getenv('L2D_THREADS', '1')),
    'seed': int(os.getenv('L2D_SEED', '42')),
    'dtype': os.getenv('L2D_DTYPE', 'f32'),
    'block_rows': int(os.getenv('L2D_BLOCK_ROWS', '65536')),
}

# Slow latency/scaling tests only run when explicitly requested
RUN_SLOW_TESTS = os.getenv('L2D_RUN_SLOW', '').lower() in ('1', 'true', 'yes')
