"""Selective Chase combining HARQ over Rayleigh OFDM: bounds, thresholds and simulation."""
from .analysis import LinkParams, analytic_curves, ber_ccws_joint, ber_full_cc, ber_scc_joint, ber_single
from .config import Kind, ProtocolConfig
from .montecarlo import SweepSpec, TableTau, compare_to_analysis, run_sweep
from .optimizer import GridSpec, ThresholdTable, build_table, optimize_tau, tau_full_equivalent

__version__ = "0.1.0"

__all__ = [
    "LinkParams",
    "Kind",
    "ProtocolConfig",
    "analytic_curves",
    "ber_single",
    "ber_full_cc",
    "ber_scc_joint",
    "ber_ccws_joint",
    "GridSpec",
    "ThresholdTable",
    "build_table",
    "optimize_tau",
    "tau_full_equivalent",
    "SweepSpec",
    "TableTau",
    "run_sweep",
    "compare_to_analysis",
    "__version__",
]
