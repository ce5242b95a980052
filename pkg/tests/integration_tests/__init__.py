"""End-to-end tests of the pipelines and the command line."""
