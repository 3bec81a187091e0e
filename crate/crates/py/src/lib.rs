//! Placeholder; bindings land once the core API is complete.
