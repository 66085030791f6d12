from django.apps import AppConfig


class EvaluationConfig(AppConfig):
    name = 'evaluation'
    verbose_name = 'Instance and part scores'
