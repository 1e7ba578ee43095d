# src/pm_cdm/pipelines/diagnostics/__init__.py
