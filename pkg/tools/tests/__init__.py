"""Tests for the smoothed dynamic programming tools."""
