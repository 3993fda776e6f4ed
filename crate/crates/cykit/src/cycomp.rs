//! Calabi-Yau completions: absolute, deformed, relative, and localized,
//! together with Casimir elements, the j-map, negative-cyclic structure
//! elements, the bounded lift solver, pairing-matrix verification, and
//! homological perturbation reduction.

use crate::bimod::{
    dual, shift, sign_pow, standard_resolution, Bimodule, ChainMap, SymName, TwoSidedExpr,
};
use crate::error::CykError;
use crate::expr::NCExpr;
use crate::hlin::linalg::{self, Row};
use crate::hoch::{hat_map, push_cyc, CycElem, TensorElem, XComplex};
use crate::pres::{FunctorPres, Presentation};
use crate::quiver::{ArrowId, Gen, ObjId, Path};
use crate::scalar::{Field, Rat};
use num::{One, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;

/// What a fresh completion generator came from.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum NewGenKind {
    /// dual of sDf for an arrow f of the input (degree m-2-|f|)
    FDual(ArrowId),
    /// dual of E_x (degree m-1)
    CDual(ObjId),
    /// Res(A)-model generator in the localized relative case, named after a
    /// resolution basis symbol of the source
    ResModel(SymName),
}

#[derive(Clone, Debug)]
pub struct NewGen {
    pub kind: NewGenKind,
    pub arrow: ArrowId,
    /// arrow := sign * (basis element); the worked examples rename completion
    /// generators with signs, so the table carries them
    pub sign: Rat,
}

/// Naming table: how to name and sign the fresh generators.
pub struct Naming {
    pub f_dual: Box<dyn Fn(&str) -> (String, Rat)>,
    pub c_dual: Box<dyn Fn(&str) -> (String, Rat)>,
}

impl Default for Naming {
    fn default() -> Naming {
        Naming {
            f_dual: Box::new(|f| (format!("{}_v", f), Rat::one())),
            c_dual: Box::new(|x| (format!("c_{}", x), Rat::one())),
        }
    }
}

impl Naming {
    pub fn with(
        f_dual: impl Fn(&str) -> (String, Rat) + 'static,
        c_dual: impl Fn(&str) -> (String, Rat) + 'static,
    ) -> Naming {
        Naming { f_dual: Box::new(f_dual), c_dual: Box::new(c_dual) }
    }
}

/// Result of an (absolute) completion.
pub struct Completion {
    pub source: Arc<Presentation>,
    pub pres: Arc<Presentation>,
    pub inclusion: FunctorPres,
    pub m: i64,
    pub table: Vec<NewGen>,
    /// the deformation eta used, as an element of X(source); zero when absent
    pub eta: CycElem,
    /// X-complex of the completion, cached
    pub x: XComplex,
}

impl Completion {
    pub fn arrow_of(&self, kind: &NewGenKind) -> Option<(ArrowId, Rat)> {
        self.table
            .iter()
            .find(|g| &g.kind == kind)
            .map(|g| (g.arrow, g.sign.clone()))
    }
}

/// The deformed m-Calabi-Yau completion of a presentation: adjoin f_v of
/// degree m-2-|f| (reversed direction) and c_x of degree m-1, with the
/// dual-basis differentials plus d_1(f_v) = (-1)^{(|f|+1)^2} a_f and
/// d_1(c_x) = a_x for a deformation eta = sum a_f . sDf + sum a_x . E_x of
/// degree m-2.
pub fn cy_complete(
    source: &Arc<Presentation>,
    m: i64,
    eta: Option<&CycElem>,
    naming: &Naming,
) -> Result<Completion, CykError> {
    let res = Arc::new(standard_resolution(source));
    let shifted_dual = shift(&dual(&res), (m - 1) as i32);

    if let Some(eta) = eta {
        if !eta.b().is_zero() {
            return Err(CykError::NotClosedDeformation("eta is not b-closed".into()));
        }
    }

    // the quiver: source arrows (same ids), then the fresh generators with
    // the f-duals before the c-duals (the customary ordering)
    let mut order: Vec<usize> = (0..shifted_dual.basis.len()).collect();
    order.sort_by_key(|&i| match strip_shift_dual(&shifted_dual.basis[i].name) {
        Some(StripKind::FromSd(_)) => (0, i),
        _ => (1, i),
    });
    let mut alph = source.alph.clone();
    let mut table_by_basis: Vec<Option<NewGen>> = vec![None; shifted_dual.basis.len()];
    for &bi in &order {
        let b = &shifted_dual.basis[bi];
        let (kind, name, sign) = match strip_shift_dual(&b.name) {
            Some(StripKind::FromSd(f)) => {
                let (n, s) = (naming.f_dual)(&source.alph.quiver.arrow_info(f).name);
                (NewGenKind::FDual(f), n, s)
            }
            Some(StripKind::FromE(x)) => {
                let (n, s) = (naming.c_dual)(source.alph.quiver.obj_name(x));
                (NewGenKind::CDual(x), n, s)
            }
            None => {
                return Err(CykError::Other("unexpected resolution basis symbol".into()));
            }
        };
        let id = alph.quiver.add_arrow(&name, b.src, b.tgt, b.degree)?;
        table_by_basis[bi] = Some(NewGen { kind, arrow: id, sign });
    }
    let table: Vec<NewGen> = table_by_basis.into_iter().map(Option::unwrap).collect();

    // differentials: originals verbatim, fresh ones translated from the
    // shifted dual, plus the deformation terms; pushed in arrow-id order
    let mut fresh_diff: Vec<(ArrowId, NCExpr)> = Vec::new();
    for (k, b) in shifted_dual.basis.iter().enumerate() {
        let mut e = NCExpr::zero(b.src, b.tgt);
        let eps_k = table[k].sign.clone();
        for ((j, l, r), c) in shifted_dual.diff[k].terms() {
            let eps_j = table[*j].sign.clone();
            let arrow = NCExpr::from_gen(&alph, Gen::plain(table[*j].arrow));
            let term = NCExpr::from_path(l.clone(), c * &eps_k * &eps_j)
                .mul(&alph, &arrow)?
                .mul(&alph, &NCExpr::from_path(r.clone(), Rat::one()))?;
            e = e.add(&term)?;
        }
        if let Some(eta) = eta {
            let a = deformation_coefficient(eta, &table[k].kind, &res);
            if !a.is_zero() {
                let sgn = match &table[k].kind {
                    NewGenKind::FDual(f) => crate::bimod::casimir_sign(
                        source.alph.quiver.arrow_info(*f).degree + 1,
                    ),
                    _ => Rat::one(),
                };
                e = e.add(&a.scale(&(eps_k.clone() * sgn)))?;
            }
        }
        fresh_diff.push((table[k].arrow, e));
    }
    fresh_diff.sort_by_key(|(id, _)| *id);
    let mut diff: Vec<NCExpr> = source.diff.clone();
    diff.extend(fresh_diff.into_iter().map(|(_, e)| e));

    let pres = Arc::new(Presentation::new(alph, diff)?);
    pres.require_d_square_zero()?;
    let inclusion = FunctorPres::new(
        source.clone(),
        pres.clone(),
        (0..source.alph.quiver.objects.len() as u32).map(ObjId).collect(),
        (0..source.alph.quiver.arrows.len() as u32)
            .map(|i| NCExpr::from_gen(&pres.alph, Gen::plain(ArrowId(i))))
            .collect(),
    )?;
    let x = XComplex::new(pres.clone());
    let eta_elem = match eta {
        Some(e) => e.clone(),
        None => CycElem::zero(res),
    };
    Ok(Completion {
        source: source.clone(),
        pres,
        inclusion,
        m,
        table,
        eta: eta_elem,
        x,
    })
}

enum StripKind {
    FromSd(ArrowId),
    FromE(ObjId),
}

fn strip_shift_dual(name: &SymName) -> Option<StripKind> {
    // expect s^{m-1}( inner )^ with inner = sDf or E_x; for m = 1 no shift
    let inner = match name {
        SymName::Shift(_, inner) => inner.as_ref(),
        other => other,
    };
    match inner {
        SymName::Dual(core) => match core.as_ref() {
            SymName::Shift(1, d) => match d.as_ref() {
                SymName::D(f) => Some(StripKind::FromSd(*f)),
                _ => None,
            },
            SymName::E(x) => Some(StripKind::FromE(*x)),
            _ => None,
        },
        _ => None,
    }
}

/// Left-form coefficient of eta on the basis symbol a generator dualizes.
fn deformation_coefficient(eta: &CycElem, kind: &NewGenKind, res: &Arc<Bimodule>) -> NCExpr {
    let idx = match kind {
        NewGenKind::FDual(f) => res.basis_index(&SymName::sd(*f)),
        NewGenKind::CDual(x) => res.basis_index(&SymName::E(*x)),
        _ => None,
    };
    match idx {
        Some(i) => eta.left_coefficient(i),
        None => NCExpr::zero(ObjId(0), ObjId(0)),
    }
}

/// The Casimir element: the representative of the identity map in
/// Res^dual (x) Res, closed of degree zero.
pub fn casimir(pres: &Arc<Presentation>) -> (TensorElem, Arc<Bimodule>, Arc<Bimodule>) {
    let res = Arc::new(standard_resolution(pres));
    let res_dual = Arc::new(dual(&res));
    let mut theta = TensorElem::zero(res_dual.clone(), res.clone());
    for (i, b) in res.basis.iter().enumerate() {
        let coef = crate::bimod::casimir_sign(b.degree);
        theta.add_term(i, Path::identity(b.tgt), i, Path::identity(b.src), coef);
    }
    (theta, res_dual, res)
}

/// Pushes an X(source)-element into X(completion) along the inclusion.
pub fn include_x(c: &Completion, e: &CycElem) -> Result<CycElem, CykError> {
    let src_x = XComplex::new(c.source.clone());
    let induced = Arc::new(crate::bimod::induce(&c.inclusion, &src_x.res, true)?);
    let g = crate::bimod::gamma(&c.inclusion, &induced, &c.x.res)?;
    push_cyc(&c.inclusion, &g, e, &c.x)
}

/// Residual of the Casimir deformation identity
/// b(j(s^{m-1} theta)) = gamma(eta).
pub fn casimir_deformation_residual(c: &Completion) -> Result<CycElem, CykError> {
    let j = j_element(c);
    let lhs = j.b();
    let rhs = include_x(c, &c.eta)?;
    Ok(lhs.sub(&rhs))
}

/// Truncated power series in the degree -2 variable u with X-complex
/// coefficients: xi(u) = coeffs[0] + coeffs[1] u + ...; operations never read
/// beyond the truncation order.
#[derive(Clone)]
pub struct USeries {
    pub coeffs: Vec<CycElem>,
    pub trunc: usize,
}

impl USeries {
    pub fn constant(e: CycElem, trunc: usize) -> USeries {
        USeries { coeffs: vec![e], trunc }
    }

    pub fn coeff(&self, i: usize, module: &Arc<Bimodule>) -> CycElem {
        self.coeffs
            .get(i)
            .cloned()
            .unwrap_or_else(|| CycElem::zero(module.clone()))
    }
}

/// Certificate that (b + uB)(series) = 0 through the truncation order.
pub fn check_cyclic_closed(x: &XComplex, s: &USeries) -> Result<(), CykError> {
    for k in 0..=s.trunc {
        let mut r = match s.coeffs.get(k) {
            Some(e) => e.b(),
            None => x.zero(),
        };
        if k > 0 {
            if let Some(prev) = s.coeffs.get(k - 1) {
                r = r.add(&x.connes_b(prev));
            }
        }
        if !r.is_zero() {
            return Err(CykError::NotALift(format!(
                "(b+uB) residual at u^{}: {}",
                k,
                r.display()
            )));
        }
    }
    Ok(())
}

/// The negative cyclic structure element of a (deformed) completion:
/// xi(u) = (B(j theta) - i(eta^1)) - u i(eta^2) - ..., with the closedness
/// certificate through the truncation order.
pub fn cy_structure(c: &Completion, lift: &USeries) -> Result<USeries, CykError> {
    let src_x = XComplex::new(c.source.clone());
    if let Some(first) = lift.coeffs.first() {
        if !first.sub(&c.eta).is_zero() {
            return Err(CykError::NotALift("lift does not start at eta".into()));
        }
    } else if !c.eta.is_zero() {
        return Err(CykError::NotALift("empty lift for nonzero eta".into()));
    }
    check_cyclic_closed(&src_x, lift)?;

    let j = j_element(c);
    let bj = c.x.connes_b(&j);
    let mut coeffs = Vec::new();
    let eta1 = lift.coeff(1, &src_x.res);
    coeffs.push(bj.sub(&include_x(c, &eta1)?));
    for k in 1..lift.trunc {
        let etak = lift.coeff(k + 1, &src_x.res);
        coeffs.push(include_x(c, &etak)?.neg());
    }
    let xi = USeries { coeffs, trunc: lift.trunc.saturating_sub(1) };
    check_cyclic_closed(&c.x, &xi)?;
    Ok(xi)
}

/// Enumerates the double-X basis words of one degree with total path length
/// bounded by max_len.
pub(crate) fn tensor_words(x: &XComplex, degree: i64, max_len: usize) -> Vec<(usize, Path, usize, Path)> {
    let mut out = Vec::new();
    let res = &x.res;
    for i in 0..res.basis.len() {
        for j in 0..res.basis.len() {
            let bi = &res.basis[i];
            let bj = &res.basis[j];
            let ps = crate::hlin::paths_between(&x.pres, bj.tgt, bi.src, max_len);
            for p in &ps {
                let qs = crate::hlin::paths_between(&x.pres, bi.tgt, bj.src, max_len - p.len());
                for q in qs {
                    let d = bi.degree
                        + p.degree(&x.pres.alph)
                        + bj.degree
                        + q.degree(&x.pres.alph);
                    if d == degree {
                        out.push((i, p.clone(), j, q.clone()));
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Finds eta1~ in the double X-complex with B~(eta0) + b(eta1~) = 0 and
/// p(eta1~) = eta1, by exact linear solve over words of bounded length.
pub fn solve_lift(
    x: &XComplex,
    eta0: &CycElem,
    eta1: &CycElem,
    max_len: usize,
) -> Result<TensorElem, CykError> {
    let pre = x.connes_b(eta0).add(&eta1.b());
    if !pre.is_zero() {
        return Err(CykError::NotALift(format!(
            "B(eta0) + b(eta1) = {}",
            pre.display()
        )));
    }
    let target_b = x.lifted_b(eta0).neg();
    let deg = eta0
        .terms()
        .next()
        .map(|(k, _)| eta0.term_degree(k) + 1)
        .unwrap_or(1);
    let unknowns = tensor_words(x, deg, max_len);
    if unknowns.is_empty() {
        if target_b.is_zero() && eta1.is_zero() {
            return Ok(TensorElem::zero(x.res.clone(), x.res.clone()));
        }
        return Err(CykError::NoSolutionAtBound { bound: max_len });
    }

    let mut col_index: BTreeMap<String, usize> = BTreeMap::new();
    fn intern(col_index: &mut BTreeMap<String, usize>, tag: String) -> usize {
        let next = col_index.len();
        *col_index.entry(tag).or_insert(next)
    }
    let mut rows: Vec<Row> = Vec::new();
    for w in &unknowns {
        let mut e = TensorElem::zero(x.res.clone(), x.res.clone());
        e.add_term(w.0, w.1.clone(), w.2, w.3.clone(), Rat::one());
        let be = e.b();
        let pe = x.project(&e);
        let mut entries: Vec<(usize, Rat)> = Vec::new();
        for (k, c) in be.terms() {
            let tag = format!("b:{}:{:?}:{}:{:?}", k.0, k.1, k.2, k.3);
            entries.push((intern(&mut col_index, tag), c.clone()));
        }
        for (k, c) in pe.terms() {
            let tag = format!("p:{}:{:?}", k.0, k.1);
            entries.push((intern(&mut col_index, tag), c.clone()));
        }
        rows.push(linalg::row_from_rats(Field::Q, entries));
    }
    let mut rhs_entries: Vec<(usize, Rat)> = Vec::new();
    for (k, c) in target_b.terms() {
        let tag = format!("b:{}:{:?}:{}:{:?}", k.0, k.1, k.2, k.3);
        rhs_entries.push((intern(&mut col_index, tag), c.clone()));
    }
    for (k, c) in eta1.terms() {
        let tag = format!("p:{}:{:?}", k.0, k.1);
        rhs_entries.push((intern(&mut col_index, tag), c.clone()));
    }
    let rhs = linalg::row_from_rats(Field::Q, rhs_entries);

    match linalg::solve(&rows, &rhs) {
        Some(xs) => {
            let mut out = TensorElem::zero(x.res.clone(), x.res.clone());
            for (w, s) in unknowns.iter().zip(xs) {
                if let crate::scalar::Scalar::Q(q) = s {
                    out.add_term(w.0, w.1.clone(), w.2, w.3.clone(), q);
                }
            }
            let r1 = x.lifted_b(eta0).add(&out.b());
            let r2 = x.project(&out).sub(eta1);
            if !r1.is_zero() || !r2.is_zero() {
                return Err(CykError::Other("solver produced an invalid lift".into()));
            }
            Ok(out)
        }
        None => Err(CykError::NoSolutionAtBound { bound: max_len }),
    }
}

/// The matrix of the induced map Res(Pi)^dual[m] -> Res(Pi) in the displayed
/// basis order, with the triangularity verdict and diagonal signs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairingMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub row_block: Vec<usize>,
    pub col_block: Vec<usize>,
    pub entries: BTreeMap<(usize, usize), String>,
    pub triangular: bool,
    pub diagonal: Vec<Rat>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum PairClass {
    E(ObjId),
    SdOrig(ArrowId),
    SdFDual(ArrowId),
    SdCDual(ObjId),
    Other,
}

fn classify_res_basis(c: &Completion, name: &SymName) -> PairClass {
    match name {
        SymName::E(x) => PairClass::E(*x),
        SymName::Shift(1, inner) => {
            if let SymName::D(f) = inner.as_ref() {
                for g in &c.table {
                    if g.arrow == *f {
                        return match &g.kind {
                            NewGenKind::FDual(orig) => PairClass::SdFDual(*orig),
                            NewGenKind::CDual(x) => PairClass::SdCDual(*x),
                            NewGenKind::ResModel(_) => PairClass::SdOrig(*f),
                        };
                    }
                }
                PairClass::SdOrig(*f)
            } else {
                PairClass::Other
            }
        }
        _ => PairClass::Other,
    }
}

/// Pairing verdict for a closed degree-m double-X element over a completion.
/// Row order: sDc_x, sD(f_v), E_x, sDf; column order: E^, (sDf)^, (sDc)^,
/// (sD f_v)^, as displayed in the 4x4 block matrix.
pub fn pairing_check(c: &Completion, xi: &TensorElem) -> Result<PairingMatrix, CykError> {
    if !xi.b().is_zero() {
        return Err(CykError::NotClosed("pairing input is not b-closed".into()));
    }
    let res = &c.x.res;
    let res_dual = Arc::new(dual(res));
    let hat = hat_map(xi, &res_dual);

    let mut row_order: Vec<(usize, usize)> = Vec::new();
    for (i, b) in res.basis.iter().enumerate() {
        let block = match classify_res_basis(c, &b.name) {
            PairClass::SdCDual(_) => 0,
            PairClass::SdFDual(_) => 1,
            PairClass::E(_) => 2,
            _ => 3,
        };
        row_order.push((block, i));
    }
    row_order.sort();
    let mut col_order: Vec<(usize, usize)> = Vec::new();
    for (i, b) in res.basis.iter().enumerate() {
        let block = match classify_res_basis(c, &b.name) {
            PairClass::E(_) => 0,
            PairClass::SdOrig(_) => 1,
            PairClass::SdCDual(_) => 2,
            _ => 3,
        };
        col_order.push((block, i));
    }
    col_order.sort();

    build_pairing_matrix(res, &hat, &row_order, &col_order, &c.pres)
}

pub(crate) fn build_pairing_matrix(
    res: &Arc<Bimodule>,
    hat: &ChainMap,
    row_order: &[(usize, usize)],
    col_order: &[(usize, usize)],
    pres: &Arc<Presentation>,
) -> Result<PairingMatrix, CykError> {
    let row_pos: BTreeMap<usize, usize> = row_order
        .iter()
        .enumerate()
        .map(|(pos, (_, i))| (*i, pos))
        .collect();
    let values: Vec<&TwoSidedExpr> = col_order.iter().map(|(_, i)| &hat.values[*i]).collect();
    let display = |j: usize, e: &TwoSidedExpr| {
        let _ = j;
        res.display_two_sided(e)
    };
    let rows = row_order
        .iter()
        .map(|(_, i)| res.basis[*i].name.display(pres))
        .collect();
    let cols = col_order
        .iter()
        .map(|(_, i)| format!("({})^", res.basis[*i].name.display(pres)))
        .collect();
    verdict_matrix(
        values,
        &row_pos,
        row_order,
        col_order,
        rows,
        cols,
        display,
    )
}

/// Block-lower-triangular verdict: entries strictly above the block diagonal
/// must vanish; within each diagonal block the entries must form a signed
/// permutation by identity-path multiples of +-1.
pub(crate) fn verdict_matrix(
    values: Vec<&TwoSidedExpr>,
    row_pos: &BTreeMap<usize, usize>,
    row_order: &[(usize, usize)],
    col_order: &[(usize, usize)],
    rows: Vec<String>,
    cols: Vec<String>,
    display: impl Fn(usize, &TwoSidedExpr) -> String,
) -> Result<PairingMatrix, CykError> {
    let mut entries = BTreeMap::new();
    let mut triangular = true;
    let mut diagonal = Vec::new();
    let mut used_rows: std::collections::BTreeSet<usize> = Default::default();

    for (cpos, (cblock, _ci)) in col_order.iter().enumerate() {
        let value = values[cpos];
        let mut per_row: BTreeMap<usize, TwoSidedExpr> = BTreeMap::new();
        for ((j, l, r), coef) in value.terms() {
            let e = per_row
                .entry(*j)
                .or_insert_with(|| TwoSidedExpr::zero(value.src(), value.tgt()));
            e.add_term(*j, l.clone(), r.clone(), coef.clone());
        }
        let mut diag_found = Rat::zero();
        for (j, e) in &per_row {
            let rpos = row_pos[j];
            entries.insert((rpos, cpos), display(*j, e));
            let rblock = row_order[rpos].0;
            if rblock < *cblock {
                triangular = false;
            } else if rblock == *cblock {
                // must be a fresh +-1 identity-path entry
                let mut ok = false;
                if e.num_terms() == 1 {
                    let ((_, l, r), coef) = e.terms().next().unwrap();
                    if l.is_identity()
                        && r.is_identity()
                        && (coef == &Rat::one() || coef == &(-Rat::one()))
                        && used_rows.insert(rpos)
                        && diag_found.is_zero()
                    {
                        diag_found = coef.clone();
                        ok = true;
                    }
                }
                if !ok {
                    triangular = false;
                }
            }
        }
        if diag_found.is_zero() {
            triangular = false;
        }
        diagonal.push(diag_found);
    }

    Ok(PairingMatrix {
        rows,
        cols,
        row_block: row_order.iter().map(|(b, _)| *b).collect(),
        col_block: col_order.iter().map(|(b, _)| *b).collect(),
        entries,
        triangular,
        diagonal,
    })
}

/// Homological perturbation data: a split of the basis into kept and killed
/// parts and the contracting homotopy on the killed part.
pub struct PerturbationDatum {
    pub kept: Vec<usize>,
    pub killed: Vec<usize>,
    /// H on killed basis elements, valued in the killed span, degree +1
    pub h: BTreeMap<usize, TwoSidedExpr>,
}

pub struct PerturbReduceResult {
    pub reduced: Arc<Bimodule>,
    pub include: ChainMap,
    pub project: ChainMap,
    pub kept_index: BTreeMap<usize, usize>,
}

fn split_parts(e: &TwoSidedExpr, killed: &[bool]) -> (TwoSidedExpr, TwoSidedExpr) {
    let mut kept = TwoSidedExpr::zero(e.src(), e.tgt());
    let mut kill = TwoSidedExpr::zero(e.src(), e.tgt());
    for ((j, l, r), c) in e.terms() {
        if killed[*j] {
            kill.add_term(*j, l.clone(), r.clone(), c.clone());
        } else {
            kept.add_term(*j, l.clone(), r.clone(), c.clone());
        }
    }
    (kept, kill)
}

fn apply_h(w: &Bimodule, h: &BTreeMap<usize, TwoSidedExpr>, e: &TwoSidedExpr) -> TwoSidedExpr {
    let alph = &w.base.alph;
    let mut out = TwoSidedExpr::zero(e.src(), e.tgt());
    for ((j, l, r), c) in e.terms() {
        if let Some(hj) = h.get(j) {
            let sgn = sign_pow(l.degree(alph)); // H has degree +1
            for ((k, l2, r2), c2) in hj.terms() {
                let left = l.compose(alph, l2).expect("validated");
                let right = r2.compose(alph, r).expect("validated");
                out.add_term(*k, left, right, c * c2 * &sgn);
            }
        }
    }
    out
}

fn unit_of(w: &Bimodule, k: usize) -> TwoSidedExpr {
    let mut unit = TwoSidedExpr::zero(w.basis[k].src, w.basis[k].tgt);
    unit.add_term(k, Path::identity(w.basis[k].tgt), Path::identity(w.basis[k].src), Rat::one());
    unit
}

/// The homological perturbation reduction: validates the conditions, then
/// returns the reduced bimodule with differential alpha - beta H gamma and
/// the chain maps i, p with p . i = id, all certified exactly.
pub fn perturb_reduce(
    w: &Arc<Bimodule>,
    datum: &PerturbationDatum,
) -> Result<PerturbReduceResult, CykError> {
    let n = w.basis.len();
    let mut killed = vec![false; n];
    for &k in &datum.killed {
        killed[k] = true;
    }
    for &k in &datum.kept {
        if killed[k] {
            return Err(CykError::ConditionViolated {
                condition: 1,
                residual: "kept and killed overlap".into(),
            });
        }
    }
    if datum.kept.len() + datum.killed.len() != n {
        return Err(CykError::ConditionViolated {
            condition: 1,
            residual: "kept + killed must partition the basis".into(),
        });
    }

    let delta = |e: &TwoSidedExpr| -> TwoSidedExpr { split_parts(&w.d(e), &killed).1 };
    for &k in &datum.killed {
        let unit = unit_of(w, k);
        let dd = delta(&delta(&unit));
        if !dd.is_zero() {
            return Err(CykError::ConditionViolated {
                condition: 2,
                residual: w.display_two_sided(&dd),
            });
        }
        let hd = apply_h(w, &datum.h, &delta(&unit));
        let dh = delta(&apply_h(w, &datum.h, &unit));
        let resid = hd.add(&dh).sub(&unit);
        if !resid.is_zero() {
            return Err(CykError::ConditionViolated {
                condition: 3,
                residual: w.display_two_sided(&resid),
            });
        }
    }

    let mut kept_index = BTreeMap::new();
    let mut basis = Vec::new();
    for &k in &datum.kept {
        kept_index.insert(k, basis.len());
        basis.push(w.basis[k].clone());
    }
    let reindex = |e: &TwoSidedExpr| -> TwoSidedExpr {
        let mut out = TwoSidedExpr::zero(e.src(), e.tgt());
        for ((j, l, r), c) in e.terms() {
            out.add_term(kept_index[j], l.clone(), r.clone(), c.clone());
        }
        out
    };
    let mut diff = Vec::new();
    for &k in &datum.kept {
        let unit = unit_of(w, k);
        let (alpha, gamma_part) = split_parts(&w.d(&unit), &killed);
        let h_gamma = apply_h(w, &datum.h, &gamma_part);
        let (beta_h_gamma, _) = split_parts(&w.d(&h_gamma), &killed);
        diff.push(reindex(&alpha.sub(&beta_h_gamma)));
    }
    let reduced = Arc::new(Bimodule::new(w.base.clone(), basis, diff)?);
    reduced.require_d_square_zero()?;

    let mut i_vals = Vec::new();
    for &k in &datum.kept {
        let unit = unit_of(w, k);
        let (_, gamma_part) = split_parts(&w.d(&unit), &killed);
        let hg = apply_h(w, &datum.h, &gamma_part);
        i_vals.push(unit.sub(&hg));
    }
    let include = ChainMap::new(reduced.clone(), w.clone(), 0, i_vals)?;

    let mut p_vals = Vec::new();
    for k in 0..n {
        let unit = unit_of(w, k);
        if killed[k] {
            let h = apply_h(w, &datum.h, &unit);
            let (beta_h, _) = split_parts(&w.d(&h), &killed);
            p_vals.push(reindex(&beta_h.neg()));
        } else {
            p_vals.push(reindex(&unit));
        }
    }
    let project = ChainMap::new(w.clone(), reduced.clone(), 0, p_vals)?;

    let pi = project.compose(&include);
    let id = ChainMap::identity(&reduced);
    for (a, b) in pi.values.iter().zip(&id.values) {
        if !a.sub(b).is_zero() {
            return Err(CykError::ConditionViolated {
                condition: 3,
                residual: "p . i != id".into(),
            });
        }
    }
    if !include.is_closed() || !project.is_closed() {
        return Err(CykError::ConditionViolated {
            condition: 3,
            residual: "i or p does not commute with differentials".into(),
        });
    }

    Ok(PerturbReduceResult { reduced, include, project, kept_index })
}

/// The change-of-representative isomorphism between the completions deformed
/// at eta and at eta + d(zeta): identity on the source, new generators
/// shifted by the zeta coefficients. Commutation with the differentials is
/// certified by the functor validation.
pub fn change_representative(
    c: &Completion,
    zeta: &CycElem,
    naming: &Naming,
) -> Result<(Completion, FunctorPres), CykError> {
    let new_eta = c.eta.add(&zeta.b());
    let target = cy_complete(&c.source, c.m, Some(&new_eta), naming)?;
    let res = XComplex::new(c.source.clone()).res;
    let mut arrow_map: Vec<NCExpr> = Vec::new();
    for i in 0..c.pres.alph.quiver.arrows.len() as u32 {
        let id = ArrowId(i);
        if (id.0 as usize) < c.source.alph.quiver.arrows.len() {
            arrow_map.push(NCExpr::from_gen(&target.pres.alph, Gen::plain(id)));
        } else {
            let g = c.table.iter().find(|g| g.arrow == id).unwrap();
            let z = deformation_coefficient(zeta, &g.kind, &res);
            let sgn = match &g.kind {
                NewGenKind::FDual(f) => {
                    crate::bimod::casimir_sign(c.source.alph.quiver.arrow_info(*f).degree + 1)
                }
                _ => Rat::one(),
            };
            let base = NCExpr::from_gen(&target.pres.alph, Gen::plain(id));
            arrow_map.push(base.add(&z.scale(&(g.sign.clone() * sgn)))?);
        }
    }
    let phi = FunctorPres::new(
        c.pres.clone(),
        target.pres.clone(),
        (0..c.pres.alph.quiver.objects.len() as u32).map(ObjId).collect(),
        arrow_map,
    )?;
    Ok((target, phi))
}

mod relative;
pub use relative::*;
