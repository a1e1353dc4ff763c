"""
Django settings for the maud_lab project.

The project exists to run the ubmaud management commands
(``python manage.py fit|simulate|validate|transform``) with a configured
logging tree and the UBMAUD_* numerical settings. It serves no HTTP
traffic and has no database models.
"""
import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'maud-lab-local-only')

DEBUG = False

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'ubmaud',
]

DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Logging: the ubmaud modules only create loggers; handlers live here.
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'keyvalue': {
            'format': 'ts={asctime} level={levelname} logger={name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'keyvalue',
        },
    },
    'loggers': {
        'ubmaud': {
            'handlers': ['console'],
            'level': os.environ.get('UBMAUD_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}

# UB-MAUD numerical settings (see ubmaud.conf for the full list)
UBMAUD_SINGULAR_RTOL = 1e-12
UBMAUD_CONDITION_LIMIT = 1e12
UBMAUD_SCORE_TOL = 1e-8
UBMAUD_SCORE_RTOL = 1e-12
UBMAUD_MAX_ITER = 100
UBMAUD_MAX_HALVINGS = 30
UBMAUD_REPRESENTABLE_TOL = 1e-8
UBMAUD_ROOT_SEARCH_MAX_G = 16
UBMAUD_COMPARE_STARTS = True
UBMAUD_DENSE_LIMIT = 2000
UBMAUD_THREADS = os.environ.get('UBMAUD_THREADS')
UBMAUD_DEFAULT_REPLICATES = 200
