"""
Tests for the ForgeFighter system.

This module contains tests for the ForgeFighter package.
"""
