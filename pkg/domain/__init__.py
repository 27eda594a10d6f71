"""Models, samplers and the mediation workflow."""
