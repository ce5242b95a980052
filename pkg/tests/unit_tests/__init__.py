"""Unit tests for the nisqmap modules."""
