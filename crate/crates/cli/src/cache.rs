//! On-disk eigenbasis cache.
//!
//! Bases are stored at `hbar = 1`; the key is the domain content hash, the
//! mesh size, the requested state count and the sector policy.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use billiard_core::geometry::BilliardDomain;
use billiard_core::spectral::{
    read_basis, solve_basis_with, symmetry_sector_solve_with, write_basis, EigenBasis, EigenOptions, CONTAINER_VERSION,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable naming the cache directory.
pub const CACHE_ENV: &str = "BILLIARD_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CacheStatus {
    Disabled,
    Hit,
    Miss,
    /// The cached file failed its checksum and was replaced.
    Rebuilt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisKey {
    pub domain_hash: String,
    pub h: f64,
    pub states: usize,
    pub quarter: bool,
}

impl BasisKey {
    pub fn new(domain: &BilliardDomain, h: f64, states: usize, quarter: bool) -> Self {
        Self { domain_hash: hex::encode(domain.content_hash()), h, states, quarter }
    }

    pub fn digest(&self) -> String {
        let mut s = Sha256::new();
        s.update(CONTAINER_VERSION.to_le_bytes());
        s.update(self.domain_hash.as_bytes());
        s.update(self.h.to_bits().to_le_bytes());
        s.update((self.states as u64).to_le_bytes());
        s.update([self.quarter as u8]);
        hex::encode(s.finalize())
    }
}

/// Solve without caching.
pub fn solve(domain: &BilliardDomain, key: &BasisKey) -> Result<EigenBasis> {
    let opts = EigenOptions::default();
    let b = if key.quarter {
        symmetry_sector_solve_with(domain, key.h, key.states, 1.0, &opts)
    } else {
        solve_basis_with(domain, key.h, key.states, 1.0, &opts)
    };
    b.context("spectral solve")
}

#[derive(Clone, Debug)]
pub struct BasisCache {
    dir: Option<PathBuf>,
}

impl BasisCache {
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    /// Cache in `dir`, or in `$BILLIARD_CACHE_DIR`, or nowhere.
    pub fn from_env(dir: Option<PathBuf>) -> Self {
        Self { dir: dir.or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from)) }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path(&self, key: &BasisKey) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.basis", key.digest())))
    }

    /// Load the basis for `key` or solve and store it. The result has `hbar = 1`.
    pub fn get(&self, domain: &BilliardDomain, key: &BasisKey) -> Result<(EigenBasis, CacheStatus)> {
        let Some(path) = self.path(key) else {
            return Ok((solve(domain, key)?, CacheStatus::Disabled));
        };
        let mut status = CacheStatus::Miss;
        if path.exists() {
            match read_basis(&path, 1.0) {
                Ok(b) if b.domain_hash == domain.content_hash() => return Ok((b, CacheStatus::Hit)),
                Ok(_) => status = CacheStatus::Rebuilt,
                Err(e) => {
                    eprintln!("warning: discarding cache entry {}: {e}", path.display());
                    status = CacheStatus::Rebuilt;
                }
            }
        }
        let basis = solve(domain, key)?;
        let dir = path.parent().expect("cache paths have a parent");
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        write_basis(&basis, &tmp).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("moving {}", path.display()))?;
        Ok((basis, status))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use billiard_core::geometry::presets;

    fn square() -> BilliardDomain {
        BilliardDomain::from_polygon(&presets::centered_square(1.0))
    }

    #[test]
    fn key_ignores_nothing_it_should_not() {
        let d = square();
        let k = BasisKey::new(&d, 0.1, 4, true);
        let mut other = k.clone();
        other.quarter = false;
        assert_ne!(k.digest(), other.digest());
        other = k.clone();
        other.h = 0.1000000001;
        assert_ne!(k.digest(), other.digest());
        assert_eq!(k.digest(), BasisKey::new(&d, 0.1, 4, true).digest());
    }

    #[test]
    fn hit_after_miss_and_rebuild_after_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BasisCache::at(dir.path());
        let d = square();
        let key = BasisKey::new(&d, 0.1, 4, true);
        let (a, s) = cache.get(&d, &key).unwrap();
        assert_eq!(s, CacheStatus::Miss);
        let (b, s) = cache.get(&d, &key).unwrap();
        assert_eq!(s, CacheStatus::Hit);
        assert_eq!(a.lambdas, b.lambdas);
        assert_eq!(a.vectors, b.vectors);

        let path = cache.path(&key).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        let (c, s) = cache.get(&d, &key).unwrap();
        assert_eq!(s, CacheStatus::Rebuilt);
        assert_eq!(a.lambdas, c.lambdas);
        assert_eq!(cache.get(&d, &key).unwrap().1, CacheStatus::Hit);
    }

    #[test]
    fn disabled_cache_solves() {
        let d = square();
        let (b, s) = BasisCache::disabled().get(&d, &BasisKey::new(&d, 0.2, 2, false)).unwrap();
        assert_eq!(s, CacheStatus::Disabled);
        assert_eq!(b.len(), 2);
    }
}
