from django.apps import AppConfig


class AbsorbingConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'absorbing'
