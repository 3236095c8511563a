//! Holds the acceptance run under `tests/`; there is no library code.
