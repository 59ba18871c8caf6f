"""Uplink time-difference-of-arrival positioning toolkit.

Subpackages/modules:

- geometry: deployment layout, geodetic conversion, frame alignment
- channel: synthetic multipath CIR generation and scenario simulation
- toa: per-antenna arrival-time estimation and statistical gating
- tdoa: pairwise differencing and geometric feasibility gating
- solver: swarm position estimation, grid oracle, trajectory smoothing
- fingerprint: CIR image preprocessing for learned positioning front ends
- metrics: horizontal error statistics
- dataset: binary capture containers
- stream: transport-agnostic publish/subscribe of CIR frames
"""

__version__ = "0.1.0"
