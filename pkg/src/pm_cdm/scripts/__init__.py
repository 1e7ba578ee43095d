# src/pm_cdm/scripts/__init__.py
