"""Scenario-to-language annotation pipeline."""
