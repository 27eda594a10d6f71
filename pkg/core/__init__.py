"""Configuration, seeds and error types."""
