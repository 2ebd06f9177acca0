"""leocdn: discrete-time simulation of CDN replica placement in large
LEO satellite constellations.

The pipeline has two phases: request traces are generated by routing
synthetic web requests through the time-varying inter-satellite-link
network, then the traces are replayed under one of five replica-placement
strategies to measure bandwidth (hops) and storage.
"""

__version__ = "0.1.0"
