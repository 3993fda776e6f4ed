//! Truncated reduced bar (Hochschild) chains over a tensor product of two
//! presentations, and the shuffle product. Exists to express the
//! collapse-to-tensor identities; all homology computation routes through
//! the X-complexes.

use crate::error::CykError;
use crate::pres::Presentation;
use crate::quiver::{ObjId, Path};
use crate::scalar::Rat;
use num::{One, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

// boundary sign convention knobs, pinned by b^2 = 0 and [b, sh] = 0
const S_FACE0_HEAD: i64 = 1;
const S_FACE0: i64 = 0;
const S_MID_A: i64 = 1;
const S_MID: i64 = 1;
const S_WRAP_A: i64 = 1;
const S_WRAP: i64 = 0;

/// A morphism of A (x) B: one pure tensor of paths (linear combinations live
/// at the chain level).
pub type Slot = (Path, Path);

fn slot_degree(a: &Presentation, b: &Presentation, s: &Slot) -> i64 {
    s.0.degree(&a.alph) + s.1.degree(&b.alph)
}

fn slot_is_identity(s: &Slot) -> bool {
    s.0.is_identity() && s.1.is_identity()
}

/// Composition in the tensor category: (p, q) . (p', q') with the Koszul sign
/// (-1)^{|q||p'|}.
fn slot_mul(
    a: &Presentation,
    b: &Presentation,
    x: &Slot,
    y: &Slot,
) -> Result<(Slot, Rat), CykError> {
    let sgn = crate::bimod::sign_pow(x.1.degree(&b.alph) * y.0.degree(&a.alph));
    Ok(((x.0.compose(&a.alph, &y.0)?, x.1.compose(&b.alph, &y.1)?), sgn))
}

/// A truncated reduced bar chain: head slot then shifted tail slots.
#[derive(Clone)]
pub struct BarChain {
    pub a: Arc<Presentation>,
    pub b: Arc<Presentation>,
    pub max_len: usize,
    terms: BTreeMap<Vec<Slot>, Rat>,
}

impl BarChain {
    pub fn zero(a: Arc<Presentation>, b: Arc<Presentation>, max_len: usize) -> BarChain {
        BarChain { a, b, max_len, terms: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Slot>, &Rat)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, word: Vec<Slot>, coef: Rat) -> Result<(), CykError> {
        if word.len() > self.max_len + 1 {
            return Err(CykError::TruncationExceeded(format!(
                "bar word of {} tail slots exceeds {}",
                word.len() - 1,
                self.max_len
            )));
        }
        if coef.is_zero() {
            return Ok(());
        }
        // reduced: degenerate tails vanish
        if word.iter().skip(1).any(slot_is_identity) {
            return Ok(());
        }
        // cyclic composability of the word
        for i in 0..word.len() {
            let next = &word[(i + 1) % word.len()];
            if word[i].0.src() != next.0.tgt() || word[i].1.src() != next.1.tgt() {
                return Err(CykError::Composition("bar word is not cyclic".into()));
            }
        }
        match self.terms.get_mut(&word) {
            Some(v) => {
                *v += coef;
                if v.is_zero() {
                    self.terms.remove(&word);
                }
            }
            None => {
                self.terms.insert(word, coef);
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &BarChain) -> BarChain {
        let mut out = self.clone();
        for (w, c) in &other.terms {
            out.add_term(w.clone(), c.clone()).expect("validated");
        }
        out
    }

    pub fn scale(&self, c: &Rat) -> BarChain {
        if c.is_zero() {
            return BarChain::zero(self.a.clone(), self.b.clone(), self.max_len);
        }
        BarChain {
            a: self.a.clone(),
            b: self.b.clone(),
            max_len: self.max_len,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn sub(&self, other: &BarChain) -> BarChain {
        self.add(&other.scale(&-Rat::one()))
    }

    fn shifted_degrees(&self, word: &[Slot]) -> Vec<i64> {
        word.iter()
            .enumerate()
            .map(|(i, s)| {
                slot_degree(&self.a, &self.b, s) + if i == 0 { 0 } else { 1 }
            })
            .collect()
    }

    /// The Hochschild differential: internal slot differentials plus the
    /// face compositions including the wrap-around face.
    pub fn boundary(&self) -> BarChain {
        self.try_boundary().expect("validated chain")
    }

    fn try_boundary(&self) -> Result<BarChain, CykError> {
        let mut out = BarChain::zero(self.a.clone(), self.b.clone(), self.max_len);
        for (word, coef) in &self.terms {
            let degs = self.shifted_degrees(word);
            // internal: d of slot i, Koszul past earlier slots; tail slots
            // carry the shift sign
            for i in 0..word.len() {
                let prefix: i64 = degs[..i].iter().sum();
                let shift_sign = if i == 0 { Rat::one() } else { -Rat::one() };
                let (p, q) = &word[i];
                // d(p (x) q) = dp (x) q + (-1)^{|p|} p (x) dq
                let dp = self.a.d_expr(&crate::expr::NCExpr::from_path(p.clone(), Rat::one()));
                for (pp, c2) in dp.terms() {
                    let mut w = word.clone();
                    w[i] = (pp.clone(), q.clone());
                    out.add_term(
                        w,
                        coef * c2 * crate::bimod::sign_pow(prefix) * &shift_sign,
                    )?;
                }
                let dq = self.b.d_expr(&crate::expr::NCExpr::from_path(q.clone(), Rat::one()));
                let psgn = crate::bimod::sign_pow(p.degree(&self.a.alph));
                for (qq, c2) in dq.terms() {
                    let mut w = word.clone();
                    w[i] = (p.clone(), qq.clone());
                    out.add_term(
                        w,
                        coef * c2 * crate::bimod::sign_pow(prefix) * &shift_sign * &psgn,
                    )?;
                }
            }
            let m = word.len() - 1;
            if m == 0 {
                continue;
            }
            // face 0: head . (s^-1 slot_1), sign (-1)^{|head|}
            {
                let (s, c2) = slot_mul(&self.a, &self.b, &word[0], &word[1])?;
                let mut w = vec![s];
                w.extend_from_slice(&word[2..]);
                out.add_term(
                    w,
                    coef * c2 * crate::bimod::sign_pow(degs[0] * S_FACE0_HEAD + S_FACE0),
                )?;
            }
            // middle faces: collapse slots i, i+1 with
            // mu_s(sa (x) sb) = -(-1)^{|a|} s(ab)
            for i in 1..m {
                let prefix: i64 = degs[..i].iter().sum();
                let (s, c2) = slot_mul(&self.a, &self.b, &word[i], &word[i + 1])?;
                let inner = crate::bimod::sign_pow(
                    slot_degree(&self.a, &self.b, &word[i]) * S_MID_A + S_MID,
                );
                let mut w = word[..i].to_vec();
                w.push(s);
                w.extend_from_slice(&word[i + 2..]);
                out.add_term(w, coef * c2 * crate::bimod::sign_pow(prefix) * inner)?;
            }
            // wrap face: move the last slot to the front and compose into the
            // head: sign of the rotation then (s^-1) absorption
            {
                let rest: i64 = degs[..m].iter().sum();
                let rot = crate::bimod::sign_pow(degs[m] * rest);
                let (s, c2) = slot_mul(&self.a, &self.b, &word[m], &word[0])?;
                let mut w = vec![s];
                w.extend_from_slice(&word[1..m]);
                out.add_term(
                    w,
                    coef * c2 * rot * crate::bimod::sign_pow(degs[m] * S_WRAP_A + S_WRAP),
                )?;
            }
        }
        Ok(out)
    }
}

/// A chain over a single presentation, kept as the left factor of a tensor
/// with the unit category.
pub fn unit_presentation() -> Arc<Presentation> {
    let mut alph = crate::quiver::Alphabet::default();
    alph.quiver.add_object("u").unwrap();
    Arc::new(Presentation::free(alph))
}

/// Embeds single-category bar data (head, tails) as a tensor chain.
pub fn chain_from_paths(
    a: &Arc<Presentation>,
    b: &Arc<Presentation>,
    head: (Path, Path),
    tails: &[(Path, Path)],
    max_len: usize,
) -> Result<BarChain, CykError> {
    let mut out = BarChain::zero(a.clone(), b.clone(), max_len);
    let mut w = vec![head];
    w.extend_from_slice(tails);
    out.add_term(w, Rat::one())?;
    Ok(out)
}

/// The shuffle product sh : C(A) (x) C(B) -> C(A (x) B): all (p,q)-shuffles
/// of the tail letters with Koszul signs, the heads multiplied.
pub fn shuffle(
    left: &BarChain,  // chain over (A, unit)
    right: &BarChain, // chain over (unit, B)
    a: &Arc<Presentation>,
    b: &Arc<Presentation>,
    max_len: usize,
) -> Result<BarChain, CykError> {
    let mut out = BarChain::zero(a.clone(), b.clone(), max_len);
    for (wl, cl) in left.terms() {
        for (wr, cr) in right.terms() {
            let p = wl.len() - 1;
            let q = wr.len() - 1;
            if p + q > max_len {
                return Err(CykError::TruncationExceeded(format!(
                    "shuffle needs {} tail slots",
                    p + q
                )));
            }
            // head: (f0 (x) g0) with the Koszul sign of moving g0 past the
            // left tails
            let left_tail_deg: i64 = wl
                .iter()
                .skip(1)
                .map(|s| slot_degree(&left.a, &left.b, s) + 1)
                .sum();
            let head_sign = crate::bimod::sign_pow(
                left_tail_deg * slot_degree(&right.a, &right.b, &wr[0]),
            );
            let head = (wl[0].0.clone(), wr[0].1.clone());
            // letters to interleave, tagged with their shifted degrees
            let ltail: Vec<(Slot, i64)> = wl
                .iter()
                .skip(1)
                .map(|s| {
                    (
                        (s.0.clone(), Path::identity(wr[0].1.src())),
                        slot_degree(&left.a, &left.b, s) + 1,
                    )
                })
                .collect();
            let rtail: Vec<(Slot, i64)> = wr
                .iter()
                .skip(1)
                .map(|s| {
                    (
                        (Path::identity(wl[0].0.src()), s.1.clone()),
                        slot_degree(&right.a, &right.b, s) + 1,
                    )
                })
                .collect();
            // identity components of interleaved letters must sit at the
            // right objects; for one-object factors this is automatic, which
            // is the only case the collapse identities need
            for (mask, sign) in shuffles(p, q, &ltail, &rtail) {
                let mut w = vec![head.clone()];
                w.extend(mask);
                out.add_term(w, cl * cr * &head_sign * sign)?;
            }
        }
    }
    Ok(out)
}

/// All (p,q)-shuffles with Koszul signs of the interleavings.
fn shuffles(
    p: usize,
    q: usize,
    l: &[(Slot, i64)],
    r: &[(Slot, i64)],
) -> Vec<(Vec<Slot>, Rat)> {
    fn rec(
        l: &[(Slot, i64)],
        r: &[(Slot, i64)],
        acc: &mut Vec<Slot>,
        sign: Rat,
        out: &mut Vec<(Vec<Slot>, Rat)>,
    ) {
        match (l.first(), r.first()) {
            (None, None) => out.push((acc.clone(), sign)),
            (Some((s, _)), None) => {
                acc.push(s.clone());
                rec(&l[1..], r, acc, sign, out);
                acc.pop();
            }
            (None, Some((s, _))) => {
                acc.push(s.clone());
                rec(l, &r[1..], acc, sign, out);
                acc.pop();
            }
            (Some((ls, _ld)), Some((rs, rd))) => {
                acc.push(ls.clone());
                rec(&l[1..], r, acc, sign.clone(), out);
                acc.pop();
                // taking the right letter first moves it past all remaining
                // left letters
                let left_total: i64 = l.iter().map(|(_, d)| *d).sum();
                let s2 = sign * crate::bimod::sign_pow(rd * left_total);
                acc.push(rs.clone());
                rec(l, &r[1..], acc, s2, out);
                acc.pop();
            }
        }
    }
    let _ = (p, q);
    let mut out = Vec::new();
    let mut acc = Vec::new();
    rec(l, r, &mut acc, Rat::one(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_presentation;

    fn kx() -> Arc<Presentation> {
        Arc::new(parse_presentation("object 0\narrow x : 0 -> 0 deg 0\narrow t : 0 -> 0 deg 1\nd t = x*x\n").unwrap())
    }

    fn kz(p: i64) -> Arc<Presentation> {
        let inv = if p == 0 { " inverted" } else { "" };
        Arc::new(
            parse_presentation(&format!("object 0\narrow z : 0 -> 0 deg {}{}\n", p, inv)).unwrap(),
        )
    }

    #[test]
    fn bar_boundary_squares_to_zero() {
        let a = kx();
        let u = unit_presentation();
        let alph = &a.alph;
        let x = a.alph.quiver.arrow("x").unwrap();
        let t = a.alph.quiver.arrow("t").unwrap();
        let px = Path::gen(alph, crate::quiver::Gen::plain(x));
        let pt = Path::gen(alph, crate::quiver::Gen::plain(t));
        let iu = Path::identity(ObjId(0));
        for word in [
            vec![(px.clone(), iu.clone()), (pt.clone(), iu.clone())],
            vec![(pt.clone(), iu.clone()), (px.clone(), iu.clone()), (pt.clone(), iu.clone())],
            vec![(iu.clone(), iu.clone()), (px.clone(), iu.clone()), (px.clone(), iu.clone())],
        ] {
            let mut c = BarChain::zero(a.clone(), u.clone(), 4);
            c.add_term(word, Rat::one()).unwrap();
            let bb = c.boundary().boundary();
            assert!(bb.is_zero(), "b^2 != 0");
        }
    }

    #[test]
    fn shuffle_of_zero_simplices_is_the_tensor_product() {
        let a = kx();
        let bz = kz(1);
        let u = unit_presentation();
        let alph = &a.alph;
        let x = a.alph.quiver.arrow("x").unwrap();
        let px = Path::gen(alph, crate::quiver::Gen::plain(x));
        let zt = Path::gen(&bz.alph, crate::quiver::Gen::plain(bz.alph.quiver.arrow("z").unwrap()));
        let l = chain_from_paths(&a, &u, (px.clone(), Path::identity(ObjId(0))), &[], 3).unwrap();
        let r = chain_from_paths(&u, &bz, (Path::identity(ObjId(0)), zt.clone()), &[], 3).unwrap();
        let s = shuffle(&l, &r, &a, &bz, 3).unwrap();
        let mut expected = BarChain::zero(a.clone(), bz.clone(), 3);
        expected.add_term(vec![(px, zt)], Rat::one()).unwrap();
        assert!(s.sub(&expected).is_zero());
    }

    #[test]
    fn shuffle_is_a_chain_map_at_the_truncation() {
        // [b, sh] = 0 on tails of length <= 2
        let a = kx();
        let bz = kz(1);
        let u = unit_presentation();
        let alph = &a.alph;
        let x = a.alph.quiver.arrow("x").unwrap();
        let t = a.alph.quiver.arrow("t").unwrap();
        let px = Path::gen(alph, crate::quiver::Gen::plain(x));
        let pt = Path::gen(alph, crate::quiver::Gen::plain(t));
        let zt = Path::gen(&bz.alph, crate::quiver::Gen::plain(bz.alph.quiver.arrow("z").unwrap()));
        let iu = Path::identity(ObjId(0));
        let cases_l = [
            vec![(px.clone(), iu.clone())],
            vec![(px.clone(), iu.clone()), (pt.clone(), iu.clone())],
            vec![(pt.clone(), iu.clone()), (px.clone(), iu.clone()), (px.clone(), iu.clone())],
        ];
        let cases_r = [
            vec![(iu.clone(), zt.clone())],
            vec![(iu.clone(), zt.clone()), (iu.clone(), zt.clone())],
        ];
        for wl in &cases_l {
            for wr in &cases_r {
                let l = chain_from_paths(&a, &u, wl[0].clone(), &wl[1..], 6).unwrap();
                let r = chain_from_paths(&u, &bz, wr[0].clone(), &wr[1..], 6).unwrap();
                let sh_then_b = shuffle(&l, &r, &a, &bz, 6).unwrap().boundary();
                let bl = l.boundary();
                let br = r.boundary();
                let deg_l: i64 = wl
                    .iter()
                    .enumerate()
                    .map(|(i, s)| s.0.degree(&a.alph) + if i == 0 { 0 } else { 1 })
                    .sum();
                let b_then_sh = shuffle(&bl, &r, &a, &bz, 6)
                    .unwrap()
                    .add(&shuffle(&l, &br, &a, &bz, 6).unwrap().scale(&crate::bimod::sign_pow(deg_l)));
                assert!(
                    sh_then_b.sub(&b_then_sh).is_zero(),
                    "[b, sh] != 0"
                );
            }
        }
    }
}
