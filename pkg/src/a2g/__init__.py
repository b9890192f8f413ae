"""UAV air-to-ground channel models: LoS probability, path loss, fading, RSSI localization."""

__version__ = "0.1.0"
