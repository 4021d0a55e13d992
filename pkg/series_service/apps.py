from django.apps import AppConfig


class SeriesServiceConfig(AppConfig):
    name = 'series_service'
    verbose_name = 'Series, Disaggregation and Factor Service'
