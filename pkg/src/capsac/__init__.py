"""Covering-assignment solvers for drone-swarm 3D reconstruction workloads."""

__version__ = "0.1.0"
