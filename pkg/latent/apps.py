from django.apps import AppConfig


class LatentConfig(AppConfig):
    name = 'latent'
    verbose_name = 'Latent-space decoding engine'
