//! Deterministic seed derivation.
//!
//! Every run takes one master seed; components derive their own streams via
//! a splitmix-style hash so results are reproducible and independent of
//! evaluation order. The derivation is fixed by this file:
//!
//! ```text
//! derive(master, name, index) = splitmix64(splitmix64(master ⊕ fnv1a64(name)) ⊕ index)
//! ```

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// FNV-1a hash of a component name.
pub fn fnv1a64(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Per-component seed derived from `(master, component name, index)`.
pub fn derive_seed(master: u64, component: &str, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ fnv1a64(component)) ^ index)
}
