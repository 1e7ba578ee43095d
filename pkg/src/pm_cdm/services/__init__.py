# src/pm_cdm/services/__init__.py
