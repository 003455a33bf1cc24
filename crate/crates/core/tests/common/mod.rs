#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use blockfade::infotheory::{Decoder, MiProfile, ProfileStore};

/// Profiles cached on disk across test binaries.
pub fn profile(name: &str, decoder: Decoder) -> Arc<MiProfile> {
    static STORE: OnceLock<ProfileStore> = OnceLock::new();
    STORE
        .get_or_init(|| {
            let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("profiles");
            ProfileStore::new(Some(dir))
        })
        .get(name, decoder)
        .expect("profile")
}

pub fn qpsk() -> Arc<MiProfile> {
    profile("qpsk", Decoder::Cm)
}
