"""Config-driven experiment runner; entry point in innerdyn.cli.main."""
