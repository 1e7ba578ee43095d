# src/pm_cdm/pipelines/model/__init__.py
