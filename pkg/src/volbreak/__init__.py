"""Volatility regime detection and regime-switching GARCH(1,1) fitting."""
