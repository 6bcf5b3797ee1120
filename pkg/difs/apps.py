from django.apps import AppConfig


class DifsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'difs'
