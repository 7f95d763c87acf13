use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable overriding [`Caps::exhaustive_n`].
pub const CAP_ENV: &str = "SHORTPATH_CAP_N";

/// Size limits that keep every operation at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    /// Largest spin count for exhaustive enumeration of all `2^n` configurations.
    pub exhaustive_n: usize,
    /// Largest working dimension handled by dense diagonalization.
    pub dense_dim: usize,
    /// Largest working dimension handled by the iterative eigensolver.
    pub iterative_dim: usize,
    /// Largest spin count for dense operator assembly (convergence radius).
    pub assembly_n: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            exhaustive_n: 28,
            dense_dim: 256,
            iterative_dim: 1 << 24,
            assembly_n: 12,
        }
    }
}

impl Caps {
    /// Defaults with the exhaustive cap taken from `SHORTPATH_CAP_N` when set.
    pub fn from_env() -> Result<Self> {
        let mut caps = Self::default();
        if let Ok(raw) = std::env::var(CAP_ENV) {
            caps.exhaustive_n = raw
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("{CAP_ENV} must be an integer, got {raw:?}")))?;
        }
        Ok(caps)
    }

    pub fn check_exhaustive(&self, n: usize) -> Result<()> {
        if n > self.exhaustive_n || n >= 63 {
            return Err(Error::Resource {
                what: "spin count for enumeration",
                requested: n,
                cap: self.exhaustive_n,
            });
        }
        Ok(())
    }

    pub fn check_iterative(&self, dim: usize) -> Result<()> {
        if dim > self.iterative_dim {
            return Err(Error::Resource {
                what: "state dimension",
                requested: dim,
                cap: self.iterative_dim,
            });
        }
        Ok(())
    }

    pub fn check_assembly(&self, n: usize) -> Result<()> {
        if n > self.assembly_n {
            return Err(Error::Resource {
                what: "spin count for dense assembly",
                requested: n,
                cap: self.assembly_n,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_caps() {
        let caps = Caps::default();
        assert_eq!(caps.exhaustive_n, 28);
        assert!(caps.check_exhaustive(28).is_ok());
        assert!(matches!(caps.check_exhaustive(29), Err(Error::Resource { .. })));
    }
}
