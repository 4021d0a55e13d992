from django.apps import AppConfig


class EvaluationServiceConfig(AppConfig):
    name = 'evaluation_service'
    verbose_name = 'Backtest, Evaluation and Monitoring Service'
