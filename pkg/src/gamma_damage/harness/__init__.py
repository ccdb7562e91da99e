"""Configuration, regime classification, sweeps, reports and the command line."""

from .regimes import Regime, ScalingLaw, classify_regime, regime_of
from .report import emit_plot, parse_csv
from .sweep import HEADER, SweepConfig, SweepResult, SweepRow, construct, run_sweep

__all__ = ["HEADER", "Regime", "ScalingLaw", "SweepConfig", "SweepResult", "SweepRow",
           "classify_regime", "construct", "emit_plot", "parse_csv", "regime_of", "run_sweep"]
