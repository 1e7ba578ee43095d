# src/pm_cdm/schemas/__init__.py
