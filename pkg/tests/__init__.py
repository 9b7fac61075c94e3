"""Test suite for cqdyn."""
