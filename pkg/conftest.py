"""Root conftest; keeps the repository root importable so test modules can
reach shared helpers under tests/ regardless of how pytest is invoked."""
