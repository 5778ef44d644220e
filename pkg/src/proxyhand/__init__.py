"""proxyhand: text commands driving a virtual 21-joint hand in a simulated scene."""

__version__ = "0.1.0"
