# src/pm_cdm/pipelines/sampler/__init__.py
