//! Per-trial seed derivation. Seeds depend only on the master seed and the
//! position of the trial in the run, never on scheduling.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream namespaces.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Design = 1,
    Trial = 2,
}

pub fn derive_seed(master: u64, stream: Stream, point: u64, trial: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ point);
    splitmix64(h ^ trial)
}
