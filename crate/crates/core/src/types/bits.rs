use crate::{Error, Result};

/// One computational-basis outcome, `bits[i]` is the outcome on site `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidInput(format!("bit value {b} is not 0 or 1")));
        }
        Ok(BitString(bits))
    }

    pub fn zeros(n: usize) -> Self {
        BitString(vec![0; n])
    }

    /// Decodes a basis-state index (site 1 = most significant bit).
    pub fn from_index(index: usize, n: usize) -> Self {
        BitString((0..n).map(|j| ((index >> (n - 1 - j)) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn index(&self) -> usize {
        bits_to_index(&self.0)
    }
}

pub(crate) fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}
