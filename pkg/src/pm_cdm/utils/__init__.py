# src/pm_cdm/utils/__init__.py
