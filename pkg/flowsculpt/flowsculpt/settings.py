import os
from pathlib import Path

from decouple import Csv, config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# The project serves no HTTP; the key only satisfies Django's startup checks.
SECRET_KEY = config(
    'SECRET_KEY',
    default='flowsculpt-local-only-key-not-used-for-signing-anything',
)

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost,127.0.0.1', cast=Csv())


# Application definition

INSTALLED_APPS = [
    'flow.apps.FlowConfig',
    'networks.apps.NetworksConfig',
    'datagen.apps.DatagenConfig',
    'architectures.apps.ArchitecturesConfig',
    'inference.apps.InferenceAppConfig',
    'metrics.apps.MetricsConfig',
    'runs.apps.RunsConfig',
]


# Database
# https://docs.djangoproject.com/en/5.0/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('FLOWSCULPT_DB', default=str(BASE_DIR / 'db.sqlite3')),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Default primary key field type
# https://docs.djangoproject.com/en/5.0/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# https://docs.djangoproject.com/en/5.0/topics/logging/

LOG_LEVEL = config('FLOWSCULPT_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False}
        for app in (
            'flow', 'networks', 'datagen', 'architectures',
            'inference', 'metrics', 'runs',
        )
    },
}


# Flow sculpting toolkit

FLOWSCULPT = {
    'VERSION': '1.0.0',
    'THREADS': config('FLOWSCULPT_THREADS', default=os.cpu_count() or 1, cast=int),
    'PROGRESS': config('FLOWSCULPT_PROGRESS', default=True, cast=bool),
    'SLOW_TESTS': config('FLOWSCULPT_SLOW_TESTS', default=False, cast=bool),
    'CHANNEL': {
        'height_px': 12,
        'width_px': 100,
        'inlet_fraction': 0.25,
    },
    'MAPS': {
        'amplitude': 0.14,
        'width_scale': 0.5,
        'substeps': 4,
    },
    'INFERENCE': {
        'tau_a': 0.95,
        'tau_b': 0.99,
        'max_steps_total': 20,
        'max_steps_stage_a': 10,
        'no_improve_patience': 3,
    },
}

# Sample counts and optimiser settings per architecture. `desk` runs on a
# desktop CPU; `paper` is the full-scale sizing.
FLOWSCULPT_PRESETS = {
    'desk': {
        'apn': {'train': 20000, 'valid': 2000, 'batch': 50, 'epochs': 50},
        'apnc': {'train': 20000, 'valid': 2000, 'batch': 50, 'epochs': 50},
        'itn': {'train': 50000, 'valid': 2000, 'batch': 100, 'epochs': 100},
        'smc': {'train': 20000, 'valid': 2000, 'batch': 50, 'epochs': 50},
        'lr': 0.01,
        'patience': 10,
    },
    'paper': {
        'apn': {'train': 250240, 'valid': 60000, 'batch': 50, 'epochs': 200},
        'apnc': {'train': 250240, 'valid': 60000, 'batch': 50, 'epochs': 200},
        'itn': {'train': 500000, 'valid': 20000, 'batch': 1000, 'epochs': 500},
        'smc': {'train': 250240, 'valid': 60000, 'batch': 50, 'epochs': 200},
        'lr': 0.01,
        'patience': 10,
    },
}
