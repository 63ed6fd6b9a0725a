"""
Django settings for the PuSmiLab project.

The project has no web surface and no database: Django hosts the experiment
commands, their configuration, logging and the test runner.
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get('SMILAB_SECRET_KEY', 'pusmilab-local-only')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'smilab',
]

DATABASES = {}

USE_TZ = True

# Experiment defaults; a command's --config file and flags override them.
SMILAB = {
    'B_MAX': 200,
    'LAMBDA_GRID': [1e-3, 1e-2, 1e-1, 1.0],
    'FOLDS': 5,
    'PERMUTATIONS': 1000,
    'TRIALS': 50,
    'THREADS': 1,
    'SEED': 0,
    'OUTPUT_DIR': BASE_DIR / 'runs',
    'LOG_LEVEL': os.environ.get('SMILAB_LOG_LEVEL', 'INFO'),
}

# Create logs directory if it doesn't exist
LOGS_DIR = os.path.join(BASE_DIR, 'logs')
os.makedirs(LOGS_DIR, exist_ok=True)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'file': {
            'level': 'DEBUG',
            'class': 'logging.FileHandler',
            'filename': os.path.join(LOGS_DIR, 'smilab.log'),
            'formatter': 'verbose',
        },
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['file', 'console'],
            'level': 'ERROR',
            'propagate': True,
        },
        'smilab': {
            'handlers': ['file', 'console'],
            'level': SMILAB['LOG_LEVEL'],
            'propagate': False,
        },
    },
}
