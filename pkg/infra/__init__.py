"""File output and process pool adapters."""
