//! DG presentations: a finite graded quiver, a set of inverted degree-zero
//! arrows, and a differential assignment per generator, extended everywhere
//! as a derivation with the Koszul sign rule d(fg) = d(f)g + (-1)^{|f|} f d(g).

use crate::error::CykError;
use crate::expr::NCExpr;
use crate::quiver::{Alphabet, ArrowId, Gen, ObjId, Path};
use crate::scalar::Rat;
use num::One;
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Presentation {
    pub alph: Alphabet,
    /// differential of each arrow, indexed by `ArrowId`
    pub diff: Vec<NCExpr>,
    /// Sullivan filtration witness: an ordering of the arrows such that the
    /// differential of each arrow uses only earlier ones, when one exists
    pub sullivan: Option<Vec<ArrowId>>,
}

impl Presentation {
    /// Validates endpoints and degrees of the differentials and computes the
    /// Sullivan witness. `d^2 = 0` is *not* enforced here; `check_differential`
    /// reports on it and `parse` rejects failures.
    pub fn new(alph: Alphabet, diff: Vec<NCExpr>) -> Result<Presentation, CykError> {
        assert_eq!(alph.quiver.arrows.len(), diff.len());
        for (i, e) in diff.iter().enumerate() {
            let a = alph.quiver.arrow_info(ArrowId(i as u32));
            if e.src() != a.src || e.tgt() != a.tgt {
                return Err(CykError::Composition(format!(
                    "d({}) has wrong endpoints",
                    a.name
                )));
            }
            let deg = e.homogeneous_degree(&alph, a.degree - 1)?;
            if !e.is_zero() && deg != a.degree - 1 {
                return Err(CykError::Degree(format!(
                    "d({}) has degree {} instead of {}",
                    a.name,
                    deg,
                    a.degree - 1
                )));
            }
            if alph.inverted.contains(&ArrowId(i as u32)) && !e.is_zero() {
                return Err(CykError::NotInvertible(a.name.clone()));
            }
        }
        let mut p = Presentation { alph, diff, sullivan: None };
        p.sullivan = p.compute_sullivan();
        Ok(p)
    }

    pub fn free(alph: Alphabet) -> Presentation {
        let diff = alph
            .quiver
            .arrows
            .iter()
            .map(|a| NCExpr::zero(a.src, a.tgt))
            .collect();
        Presentation::new(alph, diff).unwrap()
    }

    pub fn arrow_diff(&self, id: ArrowId) -> &NCExpr {
        &self.diff[id.0 as usize]
    }

    fn compute_sullivan(&self) -> Option<Vec<ArrowId>> {
        let n = self.alph.quiver.arrows.len();
        let mut placed = vec![false; n];
        let mut order = Vec::with_capacity(n);
        loop {
            let mut progressed = false;
            for i in 0..n {
                if placed[i] {
                    continue;
                }
                let ok = self.diff[i].terms().all(|(p, _)| {
                    p.word().iter().all(|g| placed[g.arrow.0 as usize])
                });
                if ok {
                    placed[i] = true;
                    order.push(ArrowId(i as u32));
                    progressed = true;
                }
            }
            if order.len() == n {
                return Some(order);
            }
            if !progressed {
                return None;
            }
        }
    }

    /// d of a single letter; inverses of inverted generators are closed.
    pub fn d_gen(&self, g: Gen) -> NCExpr {
        if g.inv {
            NCExpr::zero(self.alph.gen_src(g), self.alph.gen_tgt(g))
        } else {
            self.diff[g.arrow.0 as usize].clone()
        }
    }

    pub fn d_path(&self, p: &Path) -> NCExpr {
        let alph = &self.alph;
        let mut out = NCExpr::zero(p.src(), p.tgt());
        let word = p.word();
        let mut prefix_deg: i64 = 0;
        for i in 0..word.len() {
            let g = word[i];
            let dg = self.d_gen(g);
            if !dg.is_zero() {
                let left = if i == 0 {
                    NCExpr::identity(alph.gen_tgt(g))
                } else {
                    NCExpr::from_path(Path::from_word(alph, &word[..i]).unwrap(), Rat::one())
                };
                let right = if i + 1 == word.len() {
                    NCExpr::identity(alph.gen_src(g))
                } else {
                    NCExpr::from_path(Path::from_word(alph, &word[i + 1..]).unwrap(), Rat::one())
                };
                let sign = if prefix_deg % 2 == 0 { Rat::one() } else { -Rat::one() };
                let term = left
                    .mul(alph, &dg)
                    .and_then(|x| x.mul(alph, &right))
                    .expect("validated presentation")
                    .scale(&sign);
                out = out.add(&term).expect("validated presentation");
            }
            prefix_deg += alph.gen_degree(g);
        }
        out
    }

    pub fn d_expr(&self, e: &NCExpr) -> NCExpr {
        let mut out = NCExpr::zero(e.src(), e.tgt());
        for (p, c) in e.terms() {
            out = out.add(&self.d_path(p).scale(c)).unwrap();
        }
        out
    }

    /// Per-generator d^2 report; PASS iff every residual vanishes.
    pub fn check_differential(&self) -> DiffReport {
        let entries = self
            .alph
            .quiver
            .arrows
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let residual = self.d_expr(&self.diff[i]);
                DiffEntry {
                    generator: a.name.clone(),
                    pass: residual.is_zero(),
                    residual,
                }
            })
            .collect::<Vec<_>>();
        let pass = entries.iter().all(|e| e.pass);
        DiffReport { entries, pass }
    }

    pub fn require_d_square_zero(&self) -> Result<(), CykError> {
        let report = self.check_differential();
        match report.entries.into_iter().find(|e| !e.pass) {
            None => Ok(()),
            Some(e) => Err(CykError::DSquare {
                generator: e.generator,
                residual: e.residual.display(&self.alph),
            }),
        }
    }

    /// Adds the given closed degree-0 generators to the inverted set.
    pub fn localize(&self, gens: &[ArrowId]) -> Result<Presentation, CykError> {
        for &g in gens {
            let a = self.alph.quiver.arrow_info(g);
            if a.degree != 0 || !self.diff[g.0 as usize].is_zero() {
                return Err(CykError::NotInvertible(a.name.clone()));
            }
        }
        let mut alph = self.alph.clone();
        alph.inverted.extend(gens.iter().copied());
        Presentation::new(alph, self.diff.clone())
    }

    pub fn is_semi_free(&self) -> bool {
        self.alph.inverted.is_empty()
    }

    pub fn non_negatively_graded(&self) -> bool {
        self.alph.quiver.arrows.iter().all(|a| a.degree >= 0)
    }
}

#[derive(Clone, Debug)]
pub struct DiffEntry {
    pub generator: String,
    pub residual: NCExpr,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct DiffReport {
    pub entries: Vec<DiffEntry>,
    pub pass: bool,
}

/// A DG functor between presentations, given on generators. Preserves
/// endpoints and degrees and commutes with differentials (validated).
#[derive(Clone, Debug)]
pub struct FunctorPres {
    pub source: Arc<Presentation>,
    pub target: Arc<Presentation>,
    pub obj_map: Vec<ObjId>,
    pub arrow_map: Vec<NCExpr>,
}

impl FunctorPres {
    pub fn new(
        source: Arc<Presentation>,
        target: Arc<Presentation>,
        obj_map: Vec<ObjId>,
        arrow_map: Vec<NCExpr>,
    ) -> Result<FunctorPres, CykError> {
        let f = FunctorPres { source, target, obj_map, arrow_map };
        f.validate()?;
        Ok(f)
    }

    pub fn identity(p: Arc<Presentation>) -> FunctorPres {
        let obj_map = (0..p.alph.quiver.objects.len() as u32).map(ObjId).collect();
        let arrow_map = (0..p.alph.quiver.arrows.len() as u32)
            .map(|i| NCExpr::from_gen(&p.alph, Gen::plain(ArrowId(i))))
            .collect();
        FunctorPres { source: p.clone(), target: p, obj_map, arrow_map }
    }

    fn validate(&self) -> Result<(), CykError> {
        let sq = &self.source.alph.quiver;
        if self.obj_map.len() != sq.objects.len() || self.arrow_map.len() != sq.arrows.len() {
            return Err(CykError::IncompatibleSource("functor map sizes".into()));
        }
        for (i, a) in sq.arrows.iter().enumerate() {
            let img = &self.arrow_map[i];
            if img.src() != self.obj_map[a.src.0 as usize] || img.tgt() != self.obj_map[a.tgt.0 as usize] {
                return Err(CykError::Composition(format!("F({}) has wrong endpoints", a.name)));
            }
            let deg = img.homogeneous_degree(&self.target.alph, a.degree)?;
            if !img.is_zero() && deg != a.degree {
                return Err(CykError::Degree(format!("F({}) has wrong degree", a.name)));
            }
        }
        for (i, a) in sq.arrows.iter().enumerate() {
            let lhs = self.target.d_expr(&self.arrow_map[i]);
            let rhs = self.apply_expr(self.source.arrow_diff(ArrowId(i as u32)))?;
            if lhs.sub(&rhs)?.is_zero() {
                continue;
            }
            return Err(CykError::Composition(format!(
                "functor does not commute with d on `{}`",
                a.name
            )));
        }
        Ok(())
    }

    pub fn apply_obj(&self, x: ObjId) -> ObjId {
        self.obj_map[x.0 as usize]
    }

    pub fn apply_gen(&self, g: Gen) -> Result<NCExpr, CykError> {
        let img = &self.arrow_map[g.arrow.0 as usize];
        if g.inv {
            img.invert(&self.target.alph)
        } else {
            Ok(img.clone())
        }
    }

    pub fn apply_path(&self, p: &Path) -> Result<NCExpr, CykError> {
        let mut out = NCExpr::identity(self.apply_obj(p.tgt()));
        for g in p.word() {
            out = out.mul(&self.target.alph, &self.apply_gen(*g)?)?;
        }
        // identity path maps to identity at the image object
        if p.is_identity() {
            out = NCExpr::identity(self.apply_obj(p.src()));
        }
        Ok(out)
    }

    pub fn apply_expr(&self, e: &NCExpr) -> Result<NCExpr, CykError> {
        let mut out = NCExpr::zero(self.apply_obj(e.src()), self.apply_obj(e.tgt()));
        for (p, c) in e.terms() {
            out = out.add(&self.apply_path(p)?.scale(c))?;
        }
        Ok(out)
    }

    pub fn compose(&self, inner: &FunctorPres) -> Result<FunctorPres, CykError> {
        // self . inner
        if !Arc::ptr_eq(&inner.target, &self.source) {
            return Err(CykError::IncompatibleSource("functor composition".into()));
        }
        let obj_map = inner.obj_map.iter().map(|x| self.apply_obj(*x)).collect();
        let mut arrow_map = Vec::new();
        for e in &inner.arrow_map {
            arrow_map.push(self.apply_expr(e)?);
        }
        FunctorPres::new(inner.source.clone(), self.target.clone(), obj_map, arrow_map)
    }

    /// True when the functor realizes the target as a semi-free extension of
    /// the source: injective on objects, arrows map to distinct plain arrows.
    pub fn is_strict_extension(&self) -> bool {
        let mut seen_obj = BTreeSet::new();
        if !self.obj_map.iter().all(|x| seen_obj.insert(*x)) {
            return false;
        }
        let mut seen = BTreeSet::new();
        self.arrow_map.iter().all(|e| {
            let mut it = e.terms();
            match (it.next(), it.next()) {
                (Some((p, c)), None) => {
                    *c == Rat::one()
                        && p.len() == 1
                        && !p.word()[0].inv
                        && seen.insert(p.word()[0].arrow)
                }
                _ => false,
            }
        })
    }
}

/// Disjoint union of presentations; arrow/object names get the per-part
/// suffix so the result is again a valid quiver.
pub fn coproduct(parts: &[(&Presentation, &str)]) -> Result<(Presentation, Vec<FunctorPres>), CykError> {
    let mut alph = Alphabet::default();
    let mut obj_off = Vec::new();
    let mut arrow_off = Vec::new();
    for (p, suffix) in parts {
        obj_off.push(alph.quiver.objects.len() as u32);
        arrow_off.push(alph.quiver.arrows.len() as u32);
        for name in &p.alph.quiver.objects {
            alph.quiver.add_object(&format!("{}{}", name, suffix))?;
        }
        for a in &p.alph.quiver.arrows {
            let src = ObjId(a.src.0 + obj_off.last().unwrap());
            let tgt = ObjId(a.tgt.0 + obj_off.last().unwrap());
            alph.quiver.add_arrow(&format!("{}{}", a.name, suffix), src, tgt, a.degree)?;
        }
        for inv in &p.alph.inverted {
            alph.inverted.insert(ArrowId(inv.0 + arrow_off.last().unwrap()));
        }
    }
    let mut diff = Vec::new();
    for (k, (p, _)) in parts.iter().enumerate() {
        for e in &p.diff {
            diff.push(transport_expr(e, &p.alph, &alph, obj_off[k], arrow_off[k])?);
        }
    }
    let result = Arc::new(Presentation::new(alph, diff)?);
    let mut injections = Vec::new();
    for (k, (p, _)) in parts.iter().enumerate() {
        let src = Arc::new((*p).clone());
        let obj_map = (0..p.alph.quiver.objects.len() as u32)
            .map(|i| ObjId(i + obj_off[k]))
            .collect();
        let arrow_map = (0..p.alph.quiver.arrows.len() as u32)
            .map(|i| NCExpr::from_gen(&result.alph, Gen::plain(ArrowId(i + arrow_off[k]))))
            .collect();
        injections.push(FunctorPres::new(src, result.clone(), obj_map, arrow_map)?);
    }
    Ok((result.as_ref().clone(), injections))
}

/// Re-expresses an expression over an alphabet that begins with the same
/// object and arrow declarations (id-preserving extension).
pub fn transport_expr_public(
    e: &NCExpr,
    from: &Alphabet,
    to: &Alphabet,
) -> Result<NCExpr, CykError> {
    transport_expr(e, from, to, 0, 0)
}

fn transport_expr(
    e: &NCExpr,
    _from: &Alphabet,
    to: &Alphabet,
    obj_off: u32,
    arrow_off: u32,
) -> Result<NCExpr, CykError> {
    let mut out = NCExpr::zero(ObjId(e.src().0 + obj_off), ObjId(e.tgt().0 + obj_off));
    for (p, c) in e.terms() {
        let path = if p.is_identity() {
            Path::identity(ObjId(p.src().0 + obj_off))
        } else {
            let word: Vec<Gen> = p
                .word()
                .iter()
                .map(|g| Gen { arrow: ArrowId(g.arrow.0 + arrow_off), inv: g.inv })
                .collect();
            Path::from_word(to, &word)?
        };
        out.add_term(path, c.clone())?;
    }
    Ok(out)
}

/// Pushout of `[A <-F- C -G-> B]` where `F` realizes `A` as a semi-free
/// extension of `C` (checked). The result keeps `B` on the nose and adjoins
/// the non-`C` generators of `A` with differentials transported through `G`.
/// The boolean records whether the cofibration certificate held (Sullivan
/// witness on the adjoined part), so the ordinary pushout represents the
/// homotopy pushout.
pub struct PushoutResult {
    pub result: Arc<Presentation>,
    pub from_a: FunctorPres,
    pub from_b: FunctorPres,
    pub cofibrant: bool,
}

pub fn pushout(f: &FunctorPres, g: &FunctorPres) -> Result<PushoutResult, CykError> {
    if !Arc::ptr_eq(&f.source, &g.source) {
        return Err(CykError::IncompatibleSource("pushout legs".into()));
    }
    if !f.is_strict_extension() {
        return Err(CykError::NotExtension(
            "pushout extension leg must send generators to generators".into(),
        ));
    }
    let a = &f.target;
    let b = &g.target;
    let c = &f.source;

    // which objects/arrows of A come from C
    let mut obj_from_c: Vec<Option<ObjId>> = vec![None; a.alph.quiver.objects.len()];
    for (i, x) in f.obj_map.iter().enumerate() {
        obj_from_c[x.0 as usize] = Some(ObjId(i as u32));
    }
    let mut arrow_from_c: Vec<Option<ArrowId>> = vec![None; a.alph.quiver.arrows.len()];
    for (i, e) in f.arrow_map.iter().enumerate() {
        let (p, _) = e.terms().next().unwrap();
        arrow_from_c[p.word()[0].arrow.0 as usize] = Some(ArrowId(i as u32));
    }

    let mut alph = b.alph.clone();
    // objects of A not from C
    let mut a_obj_map: Vec<ObjId> = vec![ObjId(0); a.alph.quiver.objects.len()];
    for (i, name) in a.alph.quiver.objects.iter().enumerate() {
        a_obj_map[i] = match obj_from_c[i] {
            Some(cx) => g.apply_obj(cx),
            None => alph.quiver.add_object(name)?,
        };
    }
    // arrows of A not from C become fresh arrows
    let mut fresh: Vec<(usize, ArrowId)> = Vec::new();
    for (i, arr) in a.alph.quiver.arrows.iter().enumerate() {
        if arrow_from_c[i].is_none() {
            let id = alph.quiver.add_arrow(
                &arr.name,
                a_obj_map[arr.src.0 as usize],
                a_obj_map[arr.tgt.0 as usize],
                arr.degree,
            )?;
            if a.alph.inverted.contains(&ArrowId(i as u32)) {
                alph.inverted.insert(id);
            }
            fresh.push((i, id));
        }
    }

    // map every A-arrow into the pushout alphabet once
    let mut a_arrow_imgs: Vec<NCExpr> = Vec::with_capacity(a.alph.quiver.arrows.len());
    for i in 0..a.alph.quiver.arrows.len() {
        let img = match arrow_from_c[i] {
            Some(ca) => g.arrow_map[ca.0 as usize].clone(),
            None => {
                let id = fresh.iter().find(|(j, _)| *j == i).unwrap().1;
                NCExpr::from_gen(&alph, Gen::plain(id))
            }
        };
        a_arrow_imgs.push(img);
    }
    let map_a_expr = |e: &NCExpr, alph: &Alphabet| -> Result<NCExpr, CykError> {
        let mut out = NCExpr::zero(a_obj_map[e.src().0 as usize], a_obj_map[e.tgt().0 as usize]);
        for (p, coefc) in e.terms() {
            let mut term = NCExpr::identity(a_obj_map[p.tgt().0 as usize]);
            for gen in p.word() {
                let img = a_arrow_imgs[gen.arrow.0 as usize].clone();
                let img = if gen.inv { img.invert(alph)? } else { img };
                term = term.mul(alph, &img)?;
            }
            if p.is_identity() {
                term = NCExpr::identity(a_obj_map[p.src().0 as usize]);
            }
            out = out.add(&term.scale(coefc))?;
        }
        Ok(out)
    };

    let mut diff: Vec<NCExpr> = b.diff.clone();
    for (i, _) in &fresh {
        diff.push(map_a_expr(a.arrow_diff(ArrowId(*i as u32)), &alph)?);
    }
    let result = Arc::new(Presentation::new(alph, diff)?);
    result.require_d_square_zero()?;

    let from_b = FunctorPres::new(
        b.clone(),
        result.clone(),
        (0..b.alph.quiver.objects.len() as u32).map(ObjId).collect(),
        (0..b.alph.quiver.arrows.len() as u32)
            .map(|i| NCExpr::from_gen(&result.alph, Gen::plain(ArrowId(i))))
            .collect(),
    )?;
    let mut a_arrow_map = Vec::new();
    for img in &a_arrow_imgs {
        // re-express images over the result alphabet
        a_arrow_map.push(transport_expr(img, &b.alph, &result.alph, 0, 0)?);
    }
    let from_a = FunctorPres::new(a.clone(), result.clone(), a_obj_map, a_arrow_map)?;
    let cofibrant = c.sullivan.is_some() && a.sullivan.is_some();
    Ok(PushoutResult { result, from_a, from_b, cofibrant })
}

/// Identifies objects along a surjection of object sets; arrows and
/// differentials are transported verbatim.
pub fn collapse_objects(
    p: &Presentation,
    new_objects: &[&str],
    obj_map: &[usize],
) -> Result<(Presentation, FunctorPres), CykError> {
    assert_eq!(obj_map.len(), p.alph.quiver.objects.len());
    let mut alph = Alphabet::default();
    for name in new_objects {
        alph.quiver.add_object(name)?;
    }
    for (i, a) in p.alph.quiver.arrows.iter().enumerate() {
        let id = alph.quiver.add_arrow(
            &a.name,
            ObjId(obj_map[a.src.0 as usize] as u32),
            ObjId(obj_map[a.tgt.0 as usize] as u32),
            a.degree,
        )?;
        if p.alph.inverted.contains(&ArrowId(i as u32)) {
            alph.inverted.insert(id);
        }
    }
    let mut diff = Vec::new();
    for e in &p.diff {
        let mut out = NCExpr::zero(
            ObjId(obj_map[e.src().0 as usize] as u32),
            ObjId(obj_map[e.tgt().0 as usize] as u32),
        );
        for (path, c) in e.terms() {
            let np = if path.is_identity() {
                Path::identity(ObjId(obj_map[path.src().0 as usize] as u32))
            } else {
                Path::from_word(&alph, path.word())?
            };
            out.add_term(np, c.clone())?;
        }
        diff.push(out);
    }
    let result = Arc::new(Presentation::new(alph, diff)?);
    let src = Arc::new(p.clone());
    let functor = FunctorPres::new(
        src,
        result.clone(),
        obj_map.iter().map(|i| ObjId(*i as u32)).collect(),
        (0..p.alph.quiver.arrows.len() as u32)
            .map(|i| NCExpr::from_gen(&result.alph, Gen::plain(ArrowId(i))))
            .collect(),
    )?;
    Ok((result.as_ref().clone(), functor))
}

/// Renames arrows in place (names are presentation-irrelevant bookkeeping).
pub fn rename_arrows(p: &Presentation, renames: &[(&str, &str)]) -> Result<Presentation, CykError> {
    let mut alph = p.alph.clone();
    for (old, new) in renames {
        let id = alph
            .quiver
            .arrow(old)
            .ok_or_else(|| CykError::Parse(format!("no arrow `{}` to rename", old)))?;
        if alph.quiver.arrow(new).is_some() {
            return Err(CykError::Parse(format!("rename target `{}` exists", new)));
        }
        alph.quiver.arrows[id.0 as usize].name = new.to_string();
    }
    Presentation::new(alph, p.diff.clone())
}

/// Replaces an inverted closed generator `old` by the inverse of a fresh
/// inverted generator `new` (old = new^-1 everywhere): a presentation
/// isomorphism used by the presets that parametrize loops oppositely.
pub fn invert_generator(
    p: &Presentation,
    old: &str,
    new: &str,
) -> Result<Presentation, CykError> {
    let id = p
        .alph
        .quiver
        .arrow(old)
        .ok_or_else(|| CykError::Parse(format!("no arrow `{}`", old)))?;
    if !p.alph.inverted.contains(&id) {
        return Err(CykError::NotInvertible(old.to_string()));
    }
    let mut alph = p.alph.clone();
    alph.quiver.arrows[id.0 as usize].name = new.to_string();
    let rewrite = |e: &NCExpr| -> Result<NCExpr, CykError> {
        let mut out = NCExpr::zero(e.src(), e.tgt());
        for (path, c) in e.terms() {
            let word: Vec<Gen> = path
                .word()
                .iter()
                .map(|g| {
                    if g.arrow == id {
                        Gen { arrow: id, inv: !g.inv }
                    } else {
                        *g
                    }
                })
                .collect();
            let np = if word.is_empty() {
                Path::identity(path.src())
            } else {
                Path::from_word(&alph, &word)?
            };
            out.add_term(np, c.clone())?;
        }
        Ok(out)
    };
    let mut diff = Vec::new();
    for e in &p.diff {
        diff.push(rewrite(e)?);
    }
    Presentation::new(alph, diff)
}
