//! Finite graded quivers, composable paths, and the global monomial order.
//!
//! Composition reads right to left: in a stored word `[g1, g2, .., gk]` the
//! factor `gk` acts first, so `src(word) = src(gk)` and `tgt(word) = tgt(g1)`.

use crate::error::CykError;
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ObjId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ArrowId(pub u32);

#[derive(Clone, Debug)]
pub struct Arrow {
    pub name: String,
    pub src: ObjId,
    pub tgt: ObjId,
    pub degree: i64,
}

/// A finite graded quiver. Declaration order of arrows is semantic: it fixes
/// the generator index used by the monomial order.
#[derive(Clone, Debug, Default)]
pub struct GradedQuiver {
    pub objects: Vec<String>,
    pub arrows: Vec<Arrow>,
}

impl GradedQuiver {
    pub fn object(&self, name: &str) -> Option<ObjId> {
        self.objects.iter().position(|o| o == name).map(|i| ObjId(i as u32))
    }

    pub fn arrow(&self, name: &str) -> Option<ArrowId> {
        self.arrows.iter().position(|a| a.name == name).map(|i| ArrowId(i as u32))
    }

    pub fn add_object(&mut self, name: &str) -> Result<ObjId, CykError> {
        if self.object(name).is_some() {
            return Err(CykError::Parse(format!("duplicate object `{}`", name)));
        }
        self.objects.push(name.to_string());
        Ok(ObjId(self.objects.len() as u32 - 1))
    }

    pub fn add_arrow(&mut self, name: &str, src: ObjId, tgt: ObjId, degree: i64) -> Result<ArrowId, CykError> {
        if self.arrow(name).is_some() {
            return Err(CykError::Parse(format!("duplicate arrow `{}`", name)));
        }
        self.arrows.push(Arrow { name: name.to_string(), src, tgt, degree });
        Ok(ArrowId(self.arrows.len() as u32 - 1))
    }

    pub fn arrow_info(&self, id: ArrowId) -> &Arrow {
        &self.arrows[id.0 as usize]
    }

    pub fn obj_name(&self, id: ObjId) -> &str {
        &self.objects[id.0 as usize]
    }
}

/// One letter of a path: an arrow, possibly inverse-marked. Inverse marks are
/// only legal on arrows in the presentation's inverted set.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Gen {
    pub arrow: ArrowId,
    pub inv: bool,
}

impl Gen {
    pub fn plain(arrow: ArrowId) -> Gen {
        Gen { arrow, inv: false }
    }

    pub fn inverse(arrow: ArrowId) -> Gen {
        Gen { arrow, inv: true }
    }

    pub fn opposite(self) -> Gen {
        Gen { arrow: self.arrow, inv: !self.inv }
    }
}

/// The alphabet every expression is read against: a quiver plus the set of
/// inverted degree-zero arrows. Paths over it are kept in reduced form
/// (adjacent `g g^-1` pairs cancelled).
#[derive(Clone, Debug, Default)]
pub struct Alphabet {
    pub quiver: GradedQuiver,
    pub inverted: BTreeSet<ArrowId>,
}

impl Alphabet {
    pub fn gen_src(&self, g: Gen) -> ObjId {
        let a = self.quiver.arrow_info(g.arrow);
        if g.inv { a.tgt } else { a.src }
    }

    pub fn gen_tgt(&self, g: Gen) -> ObjId {
        let a = self.quiver.arrow_info(g.arrow);
        if g.inv { a.src } else { a.tgt }
    }

    pub fn gen_degree(&self, g: Gen) -> i64 {
        // inverses only exist for degree-zero arrows
        self.quiver.arrow_info(g.arrow).degree
    }

    pub fn gen_name(&self, g: Gen) -> String {
        let a = self.quiver.arrow_info(g.arrow);
        if g.inv { format!("{}^-1", a.name) } else { a.name.clone() }
    }
}

/// A composable path. Empty paths are identities and carry their object.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Path {
    src: ObjId,
    tgt: ObjId,
    word: Vec<Gen>,
}

impl Path {
    pub fn identity(obj: ObjId) -> Path {
        Path { src: obj, tgt: obj, word: Vec::new() }
    }

    pub fn gen(alph: &Alphabet, g: Gen) -> Path {
        Path { src: alph.gen_src(g), tgt: alph.gen_tgt(g), word: vec![g] }
    }

    /// Builds a path from letters listed left to right (leftmost acts last),
    /// checking composability and reducing inverse pairs.
    pub fn from_word(alph: &Alphabet, word: &[Gen]) -> Result<Path, CykError> {
        if word.is_empty() {
            return Err(CykError::Composition("empty word needs an object; use Path::identity".into()));
        }
        for g in word {
            if g.inv && !alph.inverted.contains(&g.arrow) {
                return Err(CykError::Composition(format!(
                    "inverse mark on non-inverted arrow `{}`",
                    alph.quiver.arrow_info(g.arrow).name
                )));
            }
        }
        for w in word.windows(2) {
            if alph.gen_src(w[0]) != alph.gen_tgt(w[1]) {
                return Err(CykError::Composition(format!(
                    "non-composable path: `{}` after `{}`",
                    alph.gen_name(w[0]),
                    alph.gen_name(w[1])
                )));
            }
        }
        let src = alph.gen_src(*word.last().unwrap());
        let tgt = alph.gen_tgt(word[0]);
        let mut p = Path { src, tgt, word: word.to_vec() };
        p.reduce(alph);
        Ok(p)
    }

    fn reduce(&mut self, alph: &Alphabet) {
        let mut out: Vec<Gen> = Vec::with_capacity(self.word.len());
        for &g in &self.word {
            let cancels = matches!(out.last(), Some(&h)
                if h.arrow == g.arrow && h.inv != g.inv && alph.inverted.contains(&g.arrow));
            if cancels {
                out.pop();
            } else {
                out.push(g);
            }
        }
        self.word = out;
    }

    pub fn src(&self) -> ObjId {
        self.src
    }

    pub fn tgt(&self) -> ObjId {
        self.tgt
    }

    pub fn word(&self) -> &[Gen] {
        &self.word
    }

    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn degree(&self, alph: &Alphabet) -> i64 {
        self.word.iter().map(|g| alph.gen_degree(*g)).sum()
    }

    /// `self . other` = other, then self. Fails unless `src(self) = tgt(other)`.
    pub fn compose(&self, alph: &Alphabet, other: &Path) -> Result<Path, CykError> {
        if self.src != other.tgt {
            return Err(CykError::Composition(format!(
                "endpoints do not match: {} . {}",
                self.display(alph),
                other.display(alph)
            )));
        }
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        let mut p = Path { src: other.src, tgt: self.tgt, word };
        p.reduce(alph);
        Ok(p)
    }

    /// Formal inverse of a word all of whose letters are invertible.
    pub fn invert(&self, alph: &Alphabet) -> Result<Path, CykError> {
        for g in &self.word {
            if !alph.inverted.contains(&g.arrow) {
                return Err(CykError::NotInvertible(alph.gen_name(*g)));
            }
        }
        let word: Vec<Gen> = self.word.iter().rev().map(|g| g.opposite()).collect();
        Ok(Path { src: self.tgt, tgt: self.src, word })
    }

    pub fn display(&self, alph: &Alphabet) -> String {
        if self.word.is_empty() {
            format!("id_{}", alph.quiver.obj_name(self.src))
        } else {
            self.word.iter().map(|g| alph.gen_name(*g)).collect::<Vec<_>>().join("*")
        }
    }
}

/// Degree-lexicographic monomial order: first path length, then the letter
/// sequence by declaration index (inverse marks break ties), then endpoints.
impl Ord for Path {
    fn cmp(&self, other: &Self) -> Ordering {
        self.word
            .len()
            .cmp(&other.word.len())
            .then_with(|| self.word.cmp(&other.word))
            .then_with(|| self.src.cmp(&other.src))
            .then_with(|| self.tgt.cmp(&other.tgt))
    }
}

impl PartialOrd for Path {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.word)
    }
}
