use crate::{Error, Result};

/// Strictly increasing list of 1-based site indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subsystem {
    sites: Vec<usize>,
}

impl Subsystem {
    pub fn new(sites: Vec<usize>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidSubsystem("empty site list".into()));
        }
        if sites[0] == 0 {
            return Err(Error::InvalidSubsystem("site indices are 1-based".into()));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubsystem(format!(
                "sites must be strictly increasing, got {sites:?}"
            )));
        }
        Ok(Subsystem { sites })
    }

    /// Sites `1..=n`.
    pub fn full(n: usize) -> Self {
        Subsystem { sites: (1..=n).collect() }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.sites.binary_search(&site).is_ok()
    }

    /// Fails with `InvalidSubsystem` unless every site lies in `1..=n`.
    pub fn check_within(&self, n: usize) -> Result<()> {
        match self.sites.last() {
            Some(&last) if last > n => Err(Error::InvalidSubsystem(format!(
                "site {last} outside a {n}-qubit system"
            ))),
            _ => Ok(()),
        }
    }

    /// Maps a subsystem expressed in this subsystem's local indices back to
    /// global indices.
    pub fn compose(&self, inner: &Subsystem) -> Result<Subsystem> {
        inner.check_within(self.len())?;
        Subsystem::new(inner.sites.iter().map(|&j| self.sites[j - 1]).collect())
    }

    /// Zero-based positions, convenient for slicing.
    pub(crate) fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().map(|s| s - 1)
    }
}

impl TryFrom<Vec<usize>> for Subsystem {
    type Error = Error;

    fn try_from(sites: Vec<usize>) -> Result<Self> {
        Subsystem::new(sites)
    }
}
