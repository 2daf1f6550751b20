"""scenforge: mine driving logs for risky scenes, describe them, regenerate
them as executable scenario programs, and close the loop with adversarial
and defensive policy training."""

__version__ = "0.1.0"
