//! Test-only package. The acceptance suite lives in `tests/acceptance.rs`;
//! it sits in its own package so a failing criterion does not stop the
//! other test binaries of the workspace from running first.
