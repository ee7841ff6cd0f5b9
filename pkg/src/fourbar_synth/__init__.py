"""Four-bar linkage function-generation synthesis with per-type LSTM experts."""
