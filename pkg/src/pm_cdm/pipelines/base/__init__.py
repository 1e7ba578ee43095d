# src/pm_cdm/pipelines/base/__init__.py
