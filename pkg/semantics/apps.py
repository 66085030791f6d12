from django.apps import AppConfig


class SemanticsConfig(AppConfig):
    name = 'semantics'
    verbose_name = 'Semantic segmentation and head candidates'
