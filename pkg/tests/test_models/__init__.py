"""Scenario and document model tests."""
