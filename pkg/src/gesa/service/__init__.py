"""HTTP review service: datasets, allocation jobs, overrides, feedback."""

from gesa.service.app import create_app

__all__ = ["create_app"]
