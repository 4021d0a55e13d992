from django.apps import AppConfig


class ModelServiceConfig(AppConfig):
    name = 'model_service'
    verbose_name = 'Model Estimation and Forecast Service'
