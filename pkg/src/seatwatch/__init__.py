"""seatwatch: serial dual-channel library seat-occupancy detection.

Person detection gates object classification: only seats with no detected
person are classified for left-behind items, so the second channel runs on
as few crops as possible.
"""

__version__ = "0.1.0"
