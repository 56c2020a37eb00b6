//! Work guardrails for enumeration-heavy operations.

/// Upper bounds on the size of exhaustive work. Each can be lifted with
/// `--force` on the command line, which maps to [`Limits::unbounded`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest `p^dim` for which spheres and full spaces are enumerated.
    pub sphere_space: u64,
    /// Largest `p^dim` for which a full spectrum is computed.
    pub spectrum_space: u64,
    /// Largest `|E|^2` for which pairwise distance profiles are built.
    pub pair_work: u64,
}

pub const DEFAULT_SPHERE_SPACE: u64 = 10_000_000;
pub const DEFAULT_SPECTRUM_SPACE: u64 = 1_000_000;
pub const DEFAULT_PAIR_WORK: u64 = 100_000_000;

impl Default for Limits {
    fn default() -> Self {
        Self {
            sphere_space: DEFAULT_SPHERE_SPACE,
            spectrum_space: DEFAULT_SPECTRUM_SPACE,
            pair_work: DEFAULT_PAIR_WORK,
        }
    }
}

impl Limits {
    pub fn unbounded() -> Self {
        Self {
            sphere_space: u64::MAX,
            spectrum_space: u64::MAX,
            pair_work: u64::MAX,
        }
    }

    pub fn with_force(force: bool) -> Self {
        if force {
            Self::unbounded()
        } else {
            Self::default()
        }
    }
}

/// `p^dim`, or `None` on overflow.
pub fn space_size(p: u32, dim: usize) -> Option<u64> {
    let dim = u32::try_from(dim).ok()?;
    (p as u64).checked_pow(dim)
}
