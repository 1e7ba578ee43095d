# src/pm_cdm/formats/__init__.py
