# src/pm_cdm/pipelines/__init__.py
