"""Rate-compatible root-LDPC codes for two-user coded cooperation on block-fading channels."""
