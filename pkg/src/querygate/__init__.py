"""querygate: sensitive-query moderation gateway, analytics, and review loop."""

__version__ = "0.1.0"
