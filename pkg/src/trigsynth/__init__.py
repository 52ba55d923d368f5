"""Monitor-triggered controller synthesis and trace checking."""

__version__ = "0.1.0"
