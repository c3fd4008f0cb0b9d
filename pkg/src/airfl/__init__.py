"""IRS-assisted over-the-air federated learning uplink simulator.

Optimizes the uplink aggregation MSE of an AirFL system under per-device
rate (QoS) and SIC power-gap constraints by alternating three steps:
a Lagrange-dual MMSE receive beamformer, a convex-relaxed transmit power
allocation, and an SDR-based phase-shift design for the reflecting surface.
"""

__version__ = "0.1.0"
