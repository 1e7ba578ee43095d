# src/pm_cdm/pipelines/simulate/__init__.py
