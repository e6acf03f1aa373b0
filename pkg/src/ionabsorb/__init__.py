"""Single-ion single-photon absorption: simulation and time-tag analysis."""
