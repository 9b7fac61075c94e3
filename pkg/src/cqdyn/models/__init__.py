"""Pydantic schemas: scenario configs, toy-model parameters, reports and state documents."""
