"""Homogenization and stochastic averaging for a diffusion-reaction system
coupled to a fast Ornstein-Uhlenbeck field."""

__version__ = "0.1.0"
