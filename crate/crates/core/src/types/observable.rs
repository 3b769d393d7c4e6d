use std::fmt;

use super::Subsystem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub letters: Vec<Pauli>,
}

impl PauliTerm {
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }
}

/// Real-weighted sum of Pauli strings on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliObservable {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliObservable {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidInput("observable needs at least one term".into()))?;
        let n = first.letters.len();
        if n == 0 {
            return Err(Error::InvalidSize("Pauli strings must act on at least one qubit".into()));
        }
        for t in &terms {
            if t.letters.len() != n {
                return Err(Error::SizeMismatch(format!(
                    "Pauli strings of lengths {n} and {}",
                    t.letters.len()
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
        }
        Ok(PauliObservable { n_qubits: n, terms })
    }

    pub fn single(letters: Vec<Pauli>) -> Result<Self> {
        Self::new(vec![PauliTerm { coefficient: 1.0, letters }])
    }

    /// Parses a string such as `"ZIIX"` (site 1 first).
    pub fn from_str_letters(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::InvalidInput(format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::single(letters)
    }

    /// Single string with the given non-identity letters (1-based sites).
    pub fn on_sites(n: usize, letters: &[(usize, Pauli)]) -> Result<Self> {
        let mut v = vec![Pauli::I; n];
        for &(site, p) in letters {
            if site == 0 || site > n {
                return Err(Error::InvalidSubsystem(format!("site {site} outside {n} qubits")));
            }
            v[site - 1] = p;
        }
        Self::single(v)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `a·self + b·other` as a concatenated term list.
    pub fn linear_combination(&self, a: f64, other: &PauliObservable, b: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| PauliTerm { coefficient: a * t.coefficient, letters: t.letters.clone() })
            .chain(other.terms.iter().map(|t| PauliTerm {
                coefficient: b * t.coefficient,
                letters: t.letters.clone(),
            }))
            .collect();
        Self::new(terms)
    }

    pub fn reduce(&self, sub: &Subsystem) -> Result<PauliObservable> {
        sub.check_within(self.n_qubits)?;
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            for (i, &p) in t.letters.iter().enumerate() {
                if p != Pauli::I && !sub.contains(i + 1) {
                    return Err(Error::NotSupportedOnSubsystem(format!(
                        "{p:?} on site {} is outside {:?}",
                        i + 1,
                        sub.sites()
                    )));
                }
            }
            terms.push(PauliTerm {
                coefficient: t.coefficient,
                letters: sub.positions().map(|p| t.letters[p]).collect(),
            });
        }
        PauliObservable::new(terms)
    }
}

impl fmt::Display for PauliObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if t.coefficient != 1.0 || self.terms.len() > 1 {
                write!(f, "{}·", t.coefficient)?;
            }
            for p in &t.letters {
                write!(f, "{}", p.as_char())?;
            }
        }
        Ok(())
    }
}

/// Reindexes an observable supported on `sub` to the subsystem's local sites.
pub fn reduce_observable_to_subsystem(obs: &PauliObservable, sub: &Subsystem) -> Result<PauliObservable> {
    obs.reduce(sub)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_z1_x4_on_fifty_sites() {
        let obs = PauliObservable::on_sites(50, &[(1, Pauli::Z), (4, Pauli::X)]).unwrap();
        let r = obs.reduce(&Subsystem::new(vec![1, 4]).unwrap()).unwrap();
        assert_eq!(r, PauliObservable::from_str_letters("ZX").unwrap());
    }

    #[test]
    fn identity_reduces_to_identity() {
        let obs = PauliObservable::from_str_letters("IIIII").unwrap();
        let r = obs.reduce(&Subsystem::new(vec![2, 5]).unwrap()).unwrap();
        assert_eq!(r, PauliObservable::from_str_letters("II").unwrap());
    }

    #[test]
    fn support_outside_subsystem() {
        let obs = PauliObservable::from_str_letters("IXI").unwrap();
        let r = obs.reduce(&Subsystem::new(vec![1, 3]).unwrap());
        assert!(matches!(r, Err(Error::NotSupportedOnSubsystem(_))));
    }

    #[test]
    fn parse_and_display() {
        let o = PauliObservable::from_str_letters("zixy").unwrap();
        assert_eq!(o.to_string(), "ZIXY");
        assert!(PauliObservable::from_str_letters("ZQ").is_err());
        assert_eq!(o.terms()[0].weight(), 3);
    }
}
