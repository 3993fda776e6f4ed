//! Exact formal linear combinations of composable paths.
//!
//! All terms of one expression share source and target; like terms merge;
//! coefficients are exact rationals. The term map is ordered by the global
//! monomial order, which makes printing and iteration deterministic.

use crate::error::CykError;
use crate::quiver::{Alphabet, Gen, ObjId, Path};
use crate::scalar::{rat_display, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct NCExpr {
    src: ObjId,
    tgt: ObjId,
    terms: BTreeMap<Path, Rat>,
}

impl NCExpr {
    pub fn zero(src: ObjId, tgt: ObjId) -> NCExpr {
        NCExpr { src, tgt, terms: BTreeMap::new() }
    }

    pub fn identity(obj: ObjId) -> NCExpr {
        NCExpr::from_path(Path::identity(obj), Rat::one())
    }

    pub fn from_path(path: Path, coef: Rat) -> NCExpr {
        let mut terms = BTreeMap::new();
        let (src, tgt) = (path.src(), path.tgt());
        if !coef.is_zero() {
            terms.insert(path, coef);
        }
        NCExpr { src, tgt, terms }
    }

    pub fn from_gen(alph: &Alphabet, g: Gen) -> NCExpr {
        NCExpr::from_path(Path::gen(alph, g), Rat::one())
    }

    pub fn src(&self) -> ObjId {
        self.src
    }

    pub fn tgt(&self) -> ObjId {
        self.tgt
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Path, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn max_len(&self) -> usize {
        self.terms.keys().map(|p| p.len()).max().unwrap_or(0)
    }

    pub fn coeff(&self, p: &Path) -> Rat {
        self.terms.get(p).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add_term(&mut self, path: Path, coef: Rat) -> Result<(), CykError> {
        if coef.is_zero() {
            return Ok(());
        }
        if path.src() != self.src || path.tgt() != self.tgt {
            return Err(CykError::Composition(
                "term endpoints differ from expression endpoints".into(),
            ));
        }
        match self.terms.get_mut(&path) {
            Some(v) => {
                *v += coef;
                if v.is_zero() {
                    self.terms.remove(&path);
                }
            }
            None => {
                self.terms.insert(path, coef);
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &NCExpr) -> Result<NCExpr, CykError> {
        if self.src != other.src || self.tgt != other.tgt {
            return Err(CykError::Composition("adding expressions with different endpoints".into()));
        }
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(p.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &NCExpr) -> Result<NCExpr, CykError> {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, c: &Rat) -> NCExpr {
        if c.is_zero() {
            return NCExpr::zero(self.src, self.tgt);
        }
        NCExpr {
            src: self.src,
            tgt: self.tgt,
            terms: self.terms.iter().map(|(p, v)| (p.clone(), v * c)).collect(),
        }
    }

    pub fn neg(&self) -> NCExpr {
        self.scale(&-Rat::one())
    }

    /// `self * other` composes right to left: `other` acts first.
    pub fn mul(&self, alph: &Alphabet, other: &NCExpr) -> Result<NCExpr, CykError> {
        if self.src != other.tgt {
            return Err(CykError::Composition("product endpoints do not match".into()));
        }
        let mut out = NCExpr::zero(other.src, self.tgt);
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                out.add_term(p.compose(alph, q)?, a * b)?;
            }
        }
        Ok(out)
    }

    /// Checks all terms share one homogeneous degree; returns it (or the
    /// given default for the zero expression).
    pub fn homogeneous_degree(&self, alph: &Alphabet, default: i64) -> Result<i64, CykError> {
        let mut deg = None;
        for p in self.terms.keys() {
            let d = p.degree(alph);
            match deg {
                None => deg = Some(d),
                Some(e) if e != d => {
                    return Err(CykError::Degree("inhomogeneous expression".into()));
                }
                _ => {}
            }
        }
        Ok(deg.unwrap_or(default))
    }

    /// Inverse of an expression that is a single invertible monomial.
    pub fn invert(&self, alph: &Alphabet) -> Result<NCExpr, CykError> {
        if self.terms.len() != 1 {
            return Err(CykError::NotInvertible(format!(
                "expression with {} terms",
                self.terms.len()
            )));
        }
        let (p, c) = self.terms.iter().next().unwrap();
        Ok(NCExpr::from_path(p.invert(alph)?, c.recip()))
    }

    /// Canonical text form: terms in monomial order, unit coefficients
    /// suppressed, `id_<obj>` for identity paths.
    pub fn display(&self, alph: &Alphabet) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (p, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if i == 0 {
                if neg {
                    out.push_str("- ");
                }
            } else if neg {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            if abs.is_one() {
                out.push_str(&p.display(alph));
            } else {
                out.push_str(&format!("{}*{}", rat_display(&abs), p.display(alph)));
            }
        }
        out
    }
}
