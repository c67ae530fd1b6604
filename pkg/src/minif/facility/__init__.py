"""Main programs and composition: executables, scenarios, layer lint, gateway."""
