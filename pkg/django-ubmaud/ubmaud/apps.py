from django.apps import AppConfig


class UbmaudConfig(AppConfig):
    """Configuration for the ubmaud Django app."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'ubmaud'
    verbose_name = 'UB-MAUD'
