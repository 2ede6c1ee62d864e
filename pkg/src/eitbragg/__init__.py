"""EIT standing-wave Bragg gratings: susceptibilities, band structure, coupled-mode solitons."""

__version__ = "0.1.0"
