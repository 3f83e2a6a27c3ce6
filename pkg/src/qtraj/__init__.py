"""Ensembles of real (dBB) and complex (MdBB) quantum trajectories for
two-hole interference, with screen histograms and which-way diagnostics."""

__version__ = "0.1.0"
