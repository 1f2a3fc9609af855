//! C ABI surface (under construction).
