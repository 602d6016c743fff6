"""Multi-RIS-aided multiuser MISO downlink simulator with a from-scratch DDPG agent."""

__version__ = "0.1.0"
