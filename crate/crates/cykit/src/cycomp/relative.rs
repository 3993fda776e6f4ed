//! Relative (and localized relative) Calabi-Yau completions, the relative
//! Casimir element, relative structure elements, and the 6-block relative
//! pairing check through the homological perturbation reduction.

use super::*;
use crate::bimod::{cone, dual_map, induce};
use crate::hoch::{induce_chain_map, push_tensor, RelXComplex, RelXElem};

/// Provenance of a fresh generator of the relative completion.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RelGenKind {
    /// s^{n-1}(sDf_B)^ for an arrow f of B
    BFDual(ArrowId),
    /// s^{n-1}(E_{x,B})^
    BCDual(ObjId),
    /// s^{n-2}(sDf_A)^ (unlocalized) for an arrow f of A
    AFDual(ArrowId),
    /// s^{n-2}(E_{x,A})^ (unlocalized)
    ACDual(ObjId),
    /// localized model: the Res(A)-basis arrow named by the symbol
    AModel(SymName),
}

#[derive(Clone, Debug)]
pub struct RelGen {
    pub kind: RelGenKind,
    pub arrow: ArrowId,
    pub sign: Rat,
}

/// Naming for the relative completion's fresh generators.
pub struct RelNaming {
    pub b_f_dual: Box<dyn Fn(&str) -> (String, Rat)>,
    pub b_c_dual: Box<dyn Fn(&str) -> (String, Rat)>,
    pub a_f_dual: Box<dyn Fn(&str) -> (String, Rat)>,
    pub a_c_dual: Box<dyn Fn(&str) -> (String, Rat)>,
    /// localized model: names for the Res(A)-basis arrows (E_x / sDf)
    pub a_model_e: Box<dyn Fn(&str) -> (String, Rat)>,
    pub a_model_sd: Box<dyn Fn(&str) -> (String, Rat)>,
}

impl Default for RelNaming {
    fn default() -> RelNaming {
        RelNaming {
            b_f_dual: Box::new(|f| (format!("{}_vB", f), Rat::one())),
            b_c_dual: Box::new(|x| (format!("c_{}_B", x), Rat::one())),
            a_f_dual: Box::new(|f| (format!("{}_vA", f), Rat::one())),
            a_c_dual: Box::new(|x| (format!("c_{}_A", x), Rat::one())),
            a_model_e: Box::new(|x| (format!("e_{}", x), Rat::one())),
            a_model_sd: Box::new(|f| (format!("t_{}", f), Rat::one())),
        }
    }
}

pub struct RelCompletion {
    pub f: FunctorPres,
    pub n: i64,
    pub localized: bool,
    /// the weak CY certificate supplied in localized mode
    pub certificate: Option<TensorElem>,
    /// Pi_{n-1}(A; eta_A), or its localized Res(A)-model
    pub pi_a: Completion,
    pub pres_b: Arc<Presentation>,
    pub inclusion_b: FunctorPres,
    pub f_tilde: FunctorPres,
    pub table_b: Vec<RelGen>,
    pub eta_b: CycElem,
    pub x_b: XComplex,
}

impl RelCompletion {
    pub fn b_arrow_of(&self, kind: &RelGenKind) -> Option<(ArrowId, Rat)> {
        self.table_b
            .iter()
            .find(|g| &g.kind == kind)
            .map(|g| (g.arrow, g.sign.clone()))
    }
}

/// Builds a tensor presentation T_B(Xi): arrows of B plus one arrow per
/// basis element of Xi, with the translated differentials.
fn tensor_presentation(
    b: &Arc<Presentation>,
    xi: &Bimodule,
    names: impl Fn(&SymName) -> (String, Rat),
) -> Result<(Arc<Presentation>, Vec<(usize, ArrowId, Rat)>), CykError> {
    let mut alph = b.alph.clone();
    let mut table = Vec::new();
    for (k, elem) in xi.basis.iter().enumerate() {
        let (name, sign) = names(&elem.name);
        let id = alph.quiver.add_arrow(&name, elem.src, elem.tgt, elem.degree)?;
        table.push((k, id, sign));
    }
    let mut diff: Vec<NCExpr> = b.diff.clone();
    for (k, elem) in xi.basis.iter().enumerate() {
        let mut e = NCExpr::zero(elem.src, elem.tgt);
        let eps_k = table[k].2.clone();
        for ((j, l, r), c) in xi.diff[k].terms() {
            let eps_j = table[*j].2.clone();
            let arrow = NCExpr::from_gen(&alph, Gen::plain(table[*j].1));
            let term = NCExpr::from_path(l.clone(), c * &eps_k * &eps_j)
                .mul(&alph, &arrow)?
                .mul(&alph, &NCExpr::from_path(r.clone(), Rat::one()))?;
            e = e.add(&term)?;
        }
        diff.push(e);
    }
    let pres = Arc::new(Presentation::new(alph, diff)?);
    Ok((pres, table))
}

/// Strips Tilde decorations at any depth, reporting whether any were found.
fn strip_tilde(name: &SymName) -> (SymName, bool) {
    match name {
        SymName::Tilde(inner) => {
            let (s, _) = strip_tilde(inner);
            (s, true)
        }
        SymName::Shift(k, inner) => {
            let (s, t) = strip_tilde(inner);
            (SymName::Shift(*k, Box::new(s)), t)
        }
        SymName::Dual(inner) => {
            let (s, t) = strip_tilde(inner);
            (SymName::Dual(Box::new(s)), t)
        }
        other => (other.clone(), false),
    }
}

fn peel_shifts(name: &SymName) -> &SymName {
    match name {
        SymName::Shift(_, inner) => peel_shifts(inner),
        other => other,
    }
}

fn classify_xi_basis(name: &SymName) -> Option<RelGenKind> {
    let (stripped, tilded) = strip_tilde(name);
    let inner = peel_shifts(&stripped).clone();
    if tilded {
        // second cone layer: either plain resolution symbols (localized
        // Res(A) model) or A-duals (unlocalized)
        return match inner {
            SymName::E(x) => Some(RelGenKind::AModel(SymName::E(x))),
            SymName::D(f) => Some(RelGenKind::AModel(SymName::sd(f))),
            SymName::Dual(core) => match peel_shifts(core.as_ref()) {
                SymName::D(f) => Some(RelGenKind::AFDual(*f)),
                SymName::E(x) => Some(RelGenKind::ACDual(*x)),
                _ => None,
            },
            _ => None,
        };
    }
    match inner {
        SymName::Dual(core) => match peel_shifts(core.as_ref()) {
            SymName::D(f) => Some(RelGenKind::BFDual(*f)),
            SymName::E(x) => Some(RelGenKind::BCDual(*x)),
            _ => None,
        },
        _ => None,
    }
}

/// Options for the relative completion.
pub struct RelOptions<'a> {
    pub localized: bool,
    /// weak CY certificate for A (closed double-X element of degree n-2),
    /// required in localized mode
    pub certificate: Option<&'a TensorElem>,
    pub naming: RelNaming,
    pub naming_a: Naming,
}

/// The (deformed, localized) relative n-Calabi-Yau completion of
/// F : A -> B. `eta` is the relative deformation pair (eta_A, eta_B); in
/// localized mode eta_A must vanish.
pub fn relative_cy_complete(
    f: &FunctorPres,
    n: i64,
    eta_a: Option<&CycElem>,
    eta_b: Option<&CycElem>,
    opts: &RelOptions,
) -> Result<RelCompletion, CykError> {
    let a = f.source.clone();
    let b = f.target.clone();
    let res_a = Arc::new(standard_resolution(&a));
    let res_b = Arc::new(standard_resolution(&b));
    let fa = Arc::new(induce(f, &res_a, true)?);
    let gamma_f = crate::bimod::gamma(f, &fa, &res_b)?;

    // validate the relative deformation pair
    let xa = XComplex::with_res(a.clone(), res_a.clone());
    let xb = XComplex::with_res(b.clone(), res_b.clone());
    if let Some(ea) = eta_a {
        if opts.localized {
            return Err(CykError::DeformationNotAllowedInLocalizedMode);
        }
        if !ea.b().is_zero() {
            return Err(CykError::NotClosedPair("b(eta_A) != 0".into()));
        }
        let eb = eta_b
            .cloned()
            .unwrap_or_else(|| CycElem::zero(res_b.clone()));
        let pushed = push_cyc(f, &gamma_f, ea, &xb)?;
        if !eb.b().add(&pushed).is_zero() {
            return Err(CykError::NotClosedPair(
                "b(eta_B) + gamma_F(eta_A) != 0".into(),
            ));
        }
    } else if let Some(eb) = eta_b {
        if !eb.b().is_zero() {
            return Err(CykError::NotClosedPair("b(eta_B) != 0".into()));
        }
    }

    // Xi
    let fa_dual = Arc::new(dual(&fa));
    let res_b_dual = Arc::new(dual(&res_b));
    let gamma_dual_raw = dual_map(&gamma_f, &fa_dual, &res_b_dual);
    let gamma_dual = ChainMap::new(
        res_b_dual.clone(),
        fa_dual.clone(),
        0,
        gamma_dual_raw.values.clone(),
    )?;

    let (xi_bim, pi_a, f_tilde_gen_map): (Bimodule, Completion, Vec<(ArrowId, ArrowId, Rat)>);
    let table_raw: Vec<(usize, ArrowId, Rat)>;
    let pres_b: Arc<Presentation>;

    if !opts.localized {
        // Xi = cone(Res(B)^ -> F_! Res(A)^)[n-2]
        let (c, _ranges) = cone(&gamma_dual)?;
        let xi = shift(&c, (n - 2) as i32);
        // presentation
        let naming = &opts.naming;
        let (pres, table) = tensor_presentation(&b, &xi, |name| {
            match classify_xi_basis(name) {
                Some(RelGenKind::BFDual(fid)) => {
                    (naming.b_f_dual)(&b.alph.quiver.arrow_info(fid).name)
                }
                Some(RelGenKind::BCDual(x)) => (naming.b_c_dual)(b.alph.quiver.obj_name(x)),
                Some(RelGenKind::AFDual(fid)) => {
                    (naming.a_f_dual)(&a.alph.quiver.arrow_info(fid).name)
                }
                Some(RelGenKind::ACDual(x)) => (naming.a_c_dual)(a.alph.quiver.obj_name(x)),
                _ => ("unexpected".into(), Rat::one()),
            }
        })?;
        xi_bim = xi;
        table_raw = table;
        pres_b = pres;
        pi_a = cy_complete(&a, n - 1, eta_a, &opts.naming_a)?;
        f_tilde_gen_map = Vec::new();
    } else {
        // localized: Xi = cone(Res(B)^[n-2] -> F_! Res(A)) through the
        // supplied weak CY certificate
        let cert = opts
            .certificate
            .ok_or_else(|| CykError::MissingCYCertificate("localized mode".into()))?;
        if !cert.b().is_zero() {
            return Err(CykError::NotClosed("certificate is not b-closed".into()));
        }
        let m = n - 2;
        let res_a_dual = Arc::new(dual(&res_a));
        let xi_hat = hat_map(cert, &res_a_dual);
        let f_xi_hat = induce_chain_map(f, &xi_hat, &fa_dual, &fa)?;
        // composite on the shifted source
        let shifted_src = Arc::new(shift(&res_b_dual, m as i32));
        let mut values = Vec::new();
        for (bi, belem) in res_b_dual.basis.iter().enumerate() {
            let _ = belem;
            let mut v = TwoSidedExpr::zero(
                res_b_dual.basis[bi].src,
                res_b_dual.basis[bi].tgt,
            );
            for ((j, l, r), c) in gamma_dual.values[bi].terms() {
                let sgn = sign_pow(m + m * l.degree(&b.alph));
                // splice F_!(xi_hat) value of basis j
                for ((k, l2, r2), c2) in f_xi_hat.values[*j].terms() {
                    let left = l.compose(&b.alph, l2)?;
                    let right = r2.compose(&b.alph, r)?;
                    v.add_term(*k, left, right, c * c2 * &sgn);
                }
            }
            values.push(v);
        }
        let comp = ChainMap::new(shifted_src.clone(), fa.clone(), 0, values)?;
        let (c, _ranges) = cone(&comp)?;
        let naming = &opts.naming;
        let (pres, table) = tensor_presentation(&b, &c, |name| {
            match classify_xi_basis(name) {
                Some(RelGenKind::BFDual(fid)) => {
                    (naming.b_f_dual)(&b.alph.quiver.arrow_info(fid).name)
                }
                Some(RelGenKind::BCDual(x)) => (naming.b_c_dual)(b.alph.quiver.obj_name(x)),
                Some(RelGenKind::AModel(SymName::E(x))) => {
                    (naming.a_model_e)(a.alph.quiver.obj_name(x))
                }
                Some(RelGenKind::AModel(SymName::Shift(1, d))) => {
                    if let SymName::D(fid) = d.as_ref() {
                        (naming.a_model_sd)(&a.alph.quiver.arrow_info(*fid).name)
                    } else {
                        ("unexpected".into(), Rat::one())
                    }
                }
                _ => ("unexpected".into(), Rat::one()),
            }
        })?;
        // localize the degree-0 E-model generators
        let to_invert: Vec<ArrowId> = table
            .iter()
            .filter_map(|(k, id, _)| {
                if let Some(RelGenKind::AModel(SymName::E(_))) =
                    classify_xi_basis(&c.basis[*k].name)
                {
                    Some(*id)
                } else {
                    None
                }
            })
            .collect();
        let localized = pres.localize(&to_invert)?;
        xi_bim = c;
        table_raw = table;
        pres_b = Arc::new(localized);

        // Pi_A localized: T_A(Res(A)) with the E-generators inverted
        let (pa_pres, pa_table) = tensor_presentation(&a, &res_a, |name| match name {
            SymName::E(x) => (naming.a_model_e)(a.alph.quiver.obj_name(*x)),
            SymName::Shift(1, d) => {
                if let SymName::D(fid) = d.as_ref() {
                    (naming.a_model_sd)(&a.alph.quiver.arrow_info(*fid).name)
                } else {
                    ("unexpected".into(), Rat::one())
                }
            }
            _ => ("unexpected".into(), Rat::one()),
        })?;
        let pa_invert: Vec<ArrowId> = pa_table
            .iter()
            .filter_map(|(k, id, _)| match res_a.basis[*k].name {
                SymName::E(_) => Some(*id),
                _ => None,
            })
            .collect();
        let pa_localized = Arc::new(pa_pres.localize(&pa_invert)?);
        pa_localized.require_d_square_zero()?;
        let incl_a = FunctorPres::new(
            a.clone(),
            pa_localized.clone(),
            (0..a.alph.quiver.objects.len() as u32).map(ObjId).collect(),
            (0..a.alph.quiver.arrows.len() as u32)
                .map(|i| NCExpr::from_gen(&pa_localized.alph, Gen::plain(ArrowId(i))))
                .collect(),
        )?;
        let table_a = pa_table
            .iter()
            .map(|(k, id, sign)| NewGen {
                kind: NewGenKind::ResModel(res_a.basis[*k].name.clone()),
                arrow: *id,
                sign: sign.clone(),
            })
            .collect();
        let x_a = XComplex::new(pa_localized.clone());
        pi_a = Completion {
            source: a.clone(),
            pres: pa_localized,
            inclusion: incl_a,
            m: n - 1,
            table: table_a,
            eta: CycElem::zero(res_a.clone()),
            x: x_a,
        };
        // pair Pi_A generators with the matching Pi_B generators
        let mut pairs = Vec::new();
        for (k, id, sign) in &table_raw {
            if let Some(RelGenKind::AModel(sym)) = classify_xi_basis(&xi_bim.basis[*k].name) {
                if let Some((pa_arrow, pa_sign)) =
                    pi_a.arrow_of(&NewGenKind::ResModel(sym.clone()))
                {
                    pairs.push((pa_arrow, *id, pa_sign * sign));
                }
            }
        }
        f_tilde_gen_map = pairs;
    }

    // deformation on the B-level generators
    let mut pres_b = pres_b;
    let table_b: Vec<RelGen> = table_raw
        .iter()
        .map(|(k, id, sign)| RelGen {
            kind: classify_xi_basis(&xi_bim.basis[*k].name).expect("classified"),
            arrow: *id,
            sign: sign.clone(),
        })
        .collect();
    let eta_b_elem = eta_b
        .cloned()
        .unwrap_or_else(|| CycElem::zero(res_b.clone()));
    if !eta_b_elem.is_zero() || eta_a.is_some() {
        let mut diff = pres_b.diff.clone();
        for g in &table_b {
            match &g.kind {
                RelGenKind::BFDual(fid) => {
                    let idx = res_b.basis_index(&SymName::sd(*fid)).unwrap();
                    let coef = eta_b_elem.left_coefficient(idx);
                    if !coef.is_zero() {
                        let sgn = crate::bimod::casimir_sign(
                            b.alph.quiver.arrow_info(*fid).degree + 1,
                        ) * &g.sign;
                        let i = g.arrow.0 as usize;
                        diff[i] = diff[i].add(&coef.scale(&sgn))?;
                    }
                }
                RelGenKind::BCDual(x) => {
                    let idx = res_b.basis_index(&SymName::E(*x)).unwrap();
                    let coef = eta_b_elem.left_coefficient(idx);
                    if !coef.is_zero() {
                        let i = g.arrow.0 as usize;
                        diff[i] = diff[i].add(&coef.scale(&g.sign))?;
                    }
                }
                RelGenKind::AFDual(fid) => {
                    if let Some(ea) = eta_a {
                        let idx = res_a.basis_index(&SymName::sd(*fid)).unwrap();
                        let coef = f.apply_expr(&ea.left_coefficient(idx))?;
                        if !coef.is_zero() {
                            let sgn = crate::bimod::casimir_sign(
                                a.alph.quiver.arrow_info(*fid).degree + 1,
                            ) * &g.sign;
                            let i = g.arrow.0 as usize;
                            diff[i] = diff[i].add(&coef.scale(&sgn))?;
                        }
                    }
                }
                RelGenKind::ACDual(x) => {
                    if let Some(ea) = eta_a {
                        let idx = res_a.basis_index(&SymName::E(*x)).unwrap();
                        let coef = f.apply_expr(&ea.left_coefficient(idx))?;
                        if !coef.is_zero() {
                            let i = g.arrow.0 as usize;
                            diff[i] = diff[i].add(&coef.scale(&g.sign))?;
                        }
                    }
                }
                RelGenKind::AModel(_) => {}
            }
        }
        pres_b = Arc::new(Presentation::new(pres_b.alph.clone(), diff)?);
    }
    pres_b.require_d_square_zero()?;

    let inclusion_b = FunctorPres::new(
        b.clone(),
        pres_b.clone(),
        (0..b.alph.quiver.objects.len() as u32).map(ObjId).collect(),
        (0..b.alph.quiver.arrows.len() as u32)
            .map(|i| NCExpr::from_gen(&pres_b.alph, Gen::plain(ArrowId(i))))
            .collect(),
    )?;

    // F~ : Pi_A -> Pi_B
    let mut ft_arrows: Vec<NCExpr> = Vec::new();
    for i in 0..pi_a.pres.alph.quiver.arrows.len() as u32 {
        let id = ArrowId(i);
        if (id.0 as usize) < a.alph.quiver.arrows.len() {
            let img = f.arrow_map[id.0 as usize].clone();
            ft_arrows.push(crate::pres::transport_expr_public(
                &img,
                &b.alph,
                &pres_b.alph,
            )?);
        } else if !opts.localized {
            // A-dual generator: find the matching Pi_B generator
            let gen = pi_a.table.iter().find(|g| g.arrow == id).unwrap();
            let target_kind = match &gen.kind {
                NewGenKind::FDual(fid) => RelGenKind::AFDual(*fid),
                NewGenKind::CDual(x) => RelGenKind::ACDual(*x),
                NewGenKind::ResModel(_) => {
                    return Err(CykError::Other("unexpected generator".into()))
                }
            };
            let (arrow, sign) = self::RelCompletionLookup::lookup(&table_b, &target_kind)
                .ok_or_else(|| CykError::Other("missing A-level generator".into()))?;
            ft_arrows.push(
                NCExpr::from_gen(&pres_b.alph, Gen::plain(arrow)).scale(&(gen.sign.clone() * sign)),
            );
        } else {
            let (pa_arrow, b_arrow, sign) = f_tilde_gen_map
                .iter()
                .find(|(pa, _, _)| *pa == id)
                .cloned()
                .ok_or_else(|| CykError::Other("missing model generator".into()))?;
            let _ = pa_arrow;
            ft_arrows.push(NCExpr::from_gen(&pres_b.alph, Gen::plain(b_arrow)).scale(&sign));
        }
    }
    let f_tilde = FunctorPres::new(
        pi_a.pres.clone(),
        pres_b.clone(),
        f.obj_map.clone(),
        ft_arrows,
    )?;

    let x_b = XComplex::new(pres_b.clone());
    Ok(RelCompletion {
        f: f.clone(),
        n,
        localized: opts.localized,
        certificate: opts.certificate.cloned(),
        pi_a,
        pres_b,
        inclusion_b,
        f_tilde,
        table_b,
        eta_b: eta_b_elem,
        x_b,
    })
}

struct RelCompletionLookup;

impl RelCompletionLookup {
    fn lookup(table: &[RelGen], kind: &RelGenKind) -> Option<(ArrowId, Rat)> {
        table
            .iter()
            .find(|g| &g.kind == kind)
            .map(|g| (g.arrow, g.sign.clone()))
    }
}

/// The relative Casimir element: the pair (-s^{n-1} theta_A, s^{n-1} theta_B)
/// together with the exact gluing identity
/// (id (x) gamma)(theta_A) = (gamma^dual (x) id)(theta_B).
pub struct RelativeCasimir {
    pub theta_a: TensorElem,
    pub theta_b: TensorElem,
    pub gluing_residual: TensorElem,
}

pub fn relative_casimir(f: &FunctorPres) -> Result<RelativeCasimir, CykError> {
    let (theta_a, _res_a_dual, res_a) = casimir(&f.source);
    let (theta_b, res_b_dual, res_b) = casimir(&f.target);
    let fa = Arc::new(induce(f, &res_a, true)?);
    let fa_dual = Arc::new(dual(&fa));
    let gamma_f = crate::bimod::gamma(f, &fa, &res_b)?;
    let gamma_dual_raw = dual_map(&gamma_f, &fa_dual, &res_b_dual);
    let gamma_dual = ChainMap::new(res_b_dual, fa_dual.clone(), 0, gamma_dual_raw.values)?;

    // (id (x) gamma)(theta_A): push slot2 through gamma, slot1 to the tilde
    // copy, paths through F
    let mut lhs = TensorElem::zero(fa_dual.clone(), res_b.clone());
    for ((i, p, j, q), c) in theta_a.terms() {
        let fp = f.apply_expr(&NCExpr::from_path(p.clone(), Rat::one()))?;
        let fq = f.apply_expr(&NCExpr::from_path(q.clone(), Rat::one()))?;
        for (pp, cp) in fp.terms() {
            for (qq, cq) in fq.terms() {
                for ((k, l, r), c2) in gamma_f.values[*j].terms() {
                    let pl = pp.compose(&f.target.alph, l)?;
                    let rq = r.compose(&f.target.alph, qq)?;
                    lhs.add_term(*i, pl, *k, rq, c * cp * cq * c2);
                }
            }
        }
    }
    // (gamma^dual (x) id)(theta_B): apply gamma^dual to the bare slot1
    let mut rhs = TensorElem::zero(fa_dual, res_b);
    for ((i, p, j, q), c) in theta_b.terms() {
        for ((k, l, r), c2) in gamma_dual.values[*i].terms() {
            rhs.add_dressed(l, *k, r, p, *j, q, c * c2);
        }
    }
    let gluing_residual = lhs.sub(&rhs);
    Ok(RelativeCasimir { theta_a, theta_b, gluing_residual })
}

/// The tautological A-side j-element of a completion: the fresh arrows paired
/// against the resolution basis symbols they were named after, with the
/// Casimir signs. For absolute completions this is j(s^{m-1} theta); for the
/// localized Res(A)-model it pairs the model arrows with their symbols.
pub fn j_element(c: &Completion) -> CycElem {
    let mut out = c.x.zero();
    for g in &c.table {
        match &g.kind {
            NewGenKind::FDual(f) => {
                let coef = crate::bimod::casimir_sign(
                    c.source.alph.quiver.arrow_info(*f).degree + 1,
                ) * &g.sign;
                let idx = c.x.res.basis_index(&SymName::sd(*f)).expect("sD basis");
                let w = NCExpr::from_gen(&c.pres.alph, Gen::plain(g.arrow));
                out.add_left_form(&w, idx, &coef);
            }
            NewGenKind::CDual(x) => {
                let idx = c.x.res.basis_index(&SymName::E(*x)).expect("E basis");
                let w = NCExpr::from_gen(&c.pres.alph, Gen::plain(g.arrow));
                out.add_left_form(&w, idx, &g.sign);
            }
            NewGenKind::ResModel(sym) => {
                // pair the model arrow with the resolution symbol of the
                // arrow itself inside Pi_A
                let coef = match sym {
                    SymName::E(_) => Rat::one(),
                    _ => sign_pow(resolve_symbol_degree(c, sym)),
                };
                let idx = c
                    .x
                    .res
                    .basis_index(&SymName::sd(g.arrow))
                    .expect("sD basis of model arrow");
                let w = source_symbol_expr(c, sym);
                out.add_left_form(&w, idx, &coef);
                let _ = coef;
            }
        }
    }
    out
}

fn resolve_symbol_degree(c: &Completion, sym: &SymName) -> i64 {
    match sym {
        SymName::E(_) => 0,
        SymName::Shift(1, d) => {
            if let SymName::D(f) = d.as_ref() {
                c.source.alph.quiver.arrow_info(*f).degree + 1
            } else {
                0
            }
        }
        _ => 0,
    }
}

fn source_symbol_expr(c: &Completion, _sym: &SymName) -> NCExpr {
    // leading coefficient 1 at the identity of the arrow's target
    let arrow = c
        .table
        .iter()
        .find(|g| matches!(&g.kind, NewGenKind::ResModel(s) if s == _sym))
        .unwrap()
        .arrow;
    let info = c.pres.alph.quiver.arrow_info(arrow);
    NCExpr::identity(info.tgt)
}

/// The B-level j-image j_B(s^{n-1} theta_B) in X(Pi_B).
pub fn j_element_b(rel: &RelCompletion) -> CycElem {
    let b = &rel.f.target;
    let mut out = rel.x_b.zero();
    for g in &rel.table_b {
        match &g.kind {
            RelGenKind::BFDual(f) => {
                let coef = crate::bimod::casimir_sign(
                    b.alph.quiver.arrow_info(*f).degree + 1,
                ) * &g.sign;
                let idx = rel.x_b.res.basis_index(&SymName::sd(*f)).expect("sD basis");
                let w = NCExpr::from_gen(&rel.pres_b.alph, Gen::plain(g.arrow));
                out.add_left_form(&w, idx, &coef);
            }
            RelGenKind::BCDual(x) => {
                let idx = rel.x_b.res.basis_index(&SymName::E(*x)).expect("E basis");
                let w = NCExpr::from_gen(&rel.pres_b.alph, Gen::plain(g.arrow));
                out.add_left_form(&w, idx, &g.sign);
            }
            _ => {}
        }
    }
    out
}

/// Pushes an X(B)-element into X(Pi_B) along the inclusion.
pub fn include_x_b(rel: &RelCompletion, e: &CycElem) -> Result<CycElem, CykError> {
    let src_x = XComplex::new(rel.f.target.clone());
    let induced = Arc::new(induce(&rel.inclusion_b, &src_x.res, true)?);
    let g = crate::bimod::gamma(&rel.inclusion_b, &induced, &rel.x_b.res)?;
    push_cyc(&rel.inclusion_b, &g, e, &rel.x_b)
}

/// The relative X-complex cone over F~.
pub fn relative_x(rel: &RelCompletion) -> Result<RelXComplex, CykError> {
    RelXComplex::new(rel.f_tilde.clone())
}

/// The A-side j element: for the localized Res(A)-model it is the weak CY
/// certificate transported through the model arrows (each certificate slot-1
/// basis symbol becomes its named arrow, the slot-2 symbol the corresponding
/// resolution basis symbol of Pi_A); for the unlocalized case it is the
/// absolute j element of Pi_{n-1}(A).
pub fn j_element_a(rel: &RelCompletion) -> Result<CycElem, CykError> {
    if !rel.localized {
        return Ok(j_element(&rel.pi_a));
    }
    let cert = rel
        .certificate
        .as_ref()
        .ok_or_else(|| CykError::MissingCYCertificate("localized j element".into()))?;
    let x_a = &rel.pi_a.x;
    let mut out = x_a.zero();
    let alph = &rel.pi_a.pres.alph;
    for ((i, p, j, q), c) in cert.terms() {
        // slot 1 symbol -> its model arrow; slot 2 symbol -> the matching
        // Res(Pi_A) basis symbol; paths come along unchanged (they live in A)
        let sym_i = cert.left.basis[*i].name.clone();
        let (arrow, eps) = rel
            .pi_a
            .arrow_of(&NewGenKind::ResModel(sym_i))
            .ok_or_else(|| CykError::Other("certificate symbol has no model arrow".into()))?;
        let slot = match &cert.right.basis[*j].name {
            SymName::E(x) => x_a.res.basis_index(&SymName::E(*x)),
            SymName::Shift(1, d) => match d.as_ref() {
                SymName::D(fid) => x_a.res.basis_index(&SymName::sd(*fid)),
                _ => None,
            },
            _ => None,
        }
        .ok_or_else(|| CykError::Other("certificate slot has no resolution symbol".into()))?;
        let qp = crate::pres::transport_expr_public(
            &NCExpr::from_path(q.clone(), Rat::one()),
            &rel.f.source.alph,
            alph,
        )?;
        let pp = crate::pres::transport_expr_public(
            &NCExpr::from_path(p.clone(), Rat::one()),
            &rel.f.source.alph,
            alph,
        )?;
        let w = qp
            .mul(alph, &NCExpr::from_gen(alph, Gen::plain(arrow)))?
            .mul(alph, &pp)?
            .scale(&(c * eps));
        out.add_left_form(&w, slot, &Rat::one());
    }
    // the s^{n-2}-conjugation of the transported certificate
    Ok(out.scale(&sign_pow(rel.n - 2)))
}

/// The relative Casimir deformation identity, componentwise:
/// b(j_A) = 0 and gamma_{F~}(-j_A) + b(j_B) = gamma_B(eta_B) (pre-deformed
/// relative eta_A is handled by the absolute identity inside Pi_A).
pub fn relative_casimir_deformation_residual(
    rel: &RelCompletion,
) -> Result<(CycElem, CycElem), CykError> {
    let rx = relative_x(rel)?;
    let ja = j_element_a(rel)?;
    let jb = j_element_b(rel);
    let jrel = RelXElem { a: ja.neg(), b: jb };
    let bj = rx.b_diff(&jrel)?;
    // expected gamma(eta) = (gamma_A(eta_A), gamma_B(eta_B)); here the a-part
    // residual also covers the deformed Pi_A identity
    let expect_a = include_x(&rel.pi_a, &rel.pi_a.eta)?;
    let expect_b = include_x_b(rel, &rel.eta_b)?;
    Ok((bj.a.add(&expect_a), bj.b.sub(&expect_b)))
}

/// Relative pairing data: the 6-block matrix through the perturbation
/// reduction.
pub struct RelativePairing {
    pub matrix: PairingMatrix,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum RelClass {
    /// E_{x,B}
    EB(ObjId),
    /// sDf for f an arrow of B
    SdB(ArrowId),
    /// sD of a B-dual generator (c_{x,B} or f_B^)
    SdBDual(usize),
    /// sD of an A-level generator of Pi_B (killed)
    SdALevel(usize),
    /// shifted copy of Res(Pi_A)-basis: s E_{x,A} or s sDg
    ShiftA(usize),
    /// shifted copy of sD of an A-level new generator (killed)
    ShiftADual(usize),
    Other,
}

fn classify_rel(rel: &RelCompletion, cone_basis: &SymName, layer: usize) -> RelClass {
    // layer 0 = F~_! Res(Pi_A)[1], layer 1 = Res(Pi_B)
    let b_arrows = rel.f.target.alph.quiver.arrows.len();
    if layer == 1 {
        match cone_basis {
            SymName::E(x) => RelClass::EB(*x),
            SymName::Shift(1, d) => {
                if let SymName::D(f) = d.as_ref() {
                    if (f.0 as usize) < b_arrows {
                        RelClass::SdB(*f)
                    } else {
                        // which table entry?
                        match rel.table_b.iter().position(|g| g.arrow == *f) {
                            Some(k) => match rel.table_b[k].kind {
                                RelGenKind::BFDual(_) | RelGenKind::BCDual(_) => {
                                    RelClass::SdBDual(k)
                                }
                                _ => RelClass::SdALevel(k),
                            },
                            None => RelClass::Other,
                        }
                    }
                } else {
                    RelClass::Other
                }
            }
            _ => RelClass::Other,
        }
    } else {
        // names look like s ~X for X a Res(Pi_A) basis symbol
        let inner = match cone_basis {
            SymName::Shift(1, i) => match i.as_ref() {
                SymName::Tilde(t) => t.as_ref().clone(),
                other => other.clone(),
            },
            _ => return RelClass::Other,
        };
        match inner {
            SymName::E(_) => RelClass::ShiftA(0),
            SymName::Shift(1, d) => {
                if let SymName::D(g) = d.as_ref() {
                    // g is an arrow of Pi_A: original A-arrow or a new one
                    let a_arrows = rel.f.source.alph.quiver.arrows.len();
                    if (g.0 as usize) < a_arrows {
                        RelClass::ShiftA(1)
                    } else {
                        RelClass::ShiftADual(g.0 as usize)
                    }
                } else {
                    RelClass::Other
                }
            }
            _ => RelClass::Other,
        }
    }
}

/// Relative pairing check for a closed relative pair (s xi_A, xi_B) in the
/// double X-complex cone: validates the cone closedness, composes the induced
/// map of xi_B with the perturbation reduction, and reads the 6-block matrix.
pub fn relative_pairing_check(
    rel: &RelCompletion,
    xi_a: &TensorElem,
    xi_b: &TensorElem,
) -> Result<RelativePairing, CykError> {
    let res_pb = rel.x_b.res.clone();
    let x_a = XComplex::new(rel.pi_a.pres.clone());
    let induced_a = Arc::new(induce(&rel.f_tilde, &x_a.res, true)?);
    let gamma_ft = crate::bimod::gamma(&rel.f_tilde, &induced_a, &res_pb)?;
    if !xi_a.b().is_zero() {
        return Err(CykError::NotClosed("b(xi_A) != 0".into()));
    }
    let pushed = push_tensor(&rel.f_tilde, &gamma_ft, xi_a, &rel.x_b)?;
    let cone_resid = xi_b.b().add(&pushed);
    if !cone_resid.is_zero() {
        return Err(CykError::NotClosed(format!(
            "b(xi_B) + gamma(xi_A) = {}",
            cone_resid.display()
        )));
    }
    let (cone_bim, ranges) = cone(&gamma_ft)?;
    let cone_bim = Arc::new(cone_bim);

    // perturbation: kill sD of the A-level generators of Pi_B (layer 1) and
    // the shifted copies of the same symbols in layer 0
    let mut killed = Vec::new();
    let mut kept = Vec::new();
    let mut h: BTreeMap<usize, TwoSidedExpr> = BTreeMap::new();
    let mut layer_of = vec![0usize; cone_bim.basis.len()];
    for i in ranges[1].0..ranges[1].1 {
        layer_of[i] = 1;
    }
    // match killed pairs: sD(g)_B at layer1 <-> s ~sD(g) at layer0
    for i in 0..cone_bim.basis.len() {
        let cls = classify_rel(rel, &cone_bim.basis[i].name, layer_of[i]);
        match cls {
            RelClass::SdALevel(_) => {
                killed.push(i);
                // partner in layer 0: s ~(same symbol)
                let base_sym = match &cone_bim.basis[i].name {
                    SymName::Shift(1, d) => d.as_ref().clone(),
                    _ => unreachable!(),
                };
                // find the Pi_A arrow generating the same symbol
                let target = find_shifted_partner(rel, &cone_bim, &base_sym);
                match target {
                    Some(j) => {
                        let b = &cone_bim.basis[i];
                        let mut v = TwoSidedExpr::zero(b.src, b.tgt);
                        v.add_term(j, Path::identity(b.tgt), Path::identity(b.src), Rat::one());
                        h.insert(i, v);
                    }
                    None => {
                        return Err(CykError::Other(
                            "missing shifted partner for perturbation".into(),
                        ))
                    }
                }
            }
            RelClass::ShiftADual(_) => {
                killed.push(i);
                let b = &cone_bim.basis[i];
                h.insert(i, TwoSidedExpr::zero(b.src, b.tgt));
            }
            _ => kept.push(i),
        }
    }

    // H may need the identity scaled to satisfy H delta + delta H = id;
    // calibrate the sign per killed generator from the delta diagonal.
    let datum = calibrate_h(&cone_bim, kept.clone(), killed.clone(), h)?;
    let red = perturb_reduce(&cone_bim, &datum)?;

    // the induced map of the relative pair into the cone:
    //   iota . hat(xi_B)  +  (-1)^{n-1} s . F~_!(hat(xi_A)) . gamma^dual
    let res_pb_dual = Arc::new(dual(&res_pb));
    let hat_b = hat_map(xi_b, &res_pb_dual);
    let x_a_res_dual = Arc::new(dual(&x_a.res));
    let hat_a = hat_map(xi_a, &x_a_res_dual);
    let induced_a_dual = Arc::new(dual(&induced_a));
    let f_hat_a = induce_chain_map(&rel.f_tilde, &hat_a, &induced_a_dual, &induced_a)?;
    let gamma_ft_dual_raw = dual_map(&gamma_ft, &induced_a_dual, &res_pb_dual);
    let sgn_rel = crate::bimod::sign_pow(rel.n - 1);
    let mut incl_vals = Vec::new();
    for (ci, v) in hat_b.values.iter().enumerate() {
        let mut nv = TwoSidedExpr::zero(v.src(), v.tgt());
        for ((j, l, r), c) in v.terms() {
            nv.add_term(ranges[1].0 + j, l.clone(), r.clone(), c.clone());
        }
        // A-component through the shifted layer
        for ((j, l, r), c) in gamma_ft_dual_raw.values[ci].terms() {
            for ((k, l2, r2), c2) in f_hat_a.values[*j].terms() {
                let left = l.compose(&rel.pres_b.alph, l2)?;
                let right = r2.compose(&rel.pres_b.alph, r)?;
                // the s of the shifted layer moves past the left coefficient
                let s_sign = crate::bimod::sign_pow(left.degree(&rel.pres_b.alph));
                nv.add_term(
                    ranges[0].0 + k,
                    left,
                    right,
                    c * c2 * &sgn_rel * s_sign,
                );
            }
        }
        incl_vals.push(nv);
    }
    let into_cone = ChainMap::new(res_pb_dual.clone(), cone_bim.clone(), hat_b.degree, incl_vals)?;
    let composed = red.project.compose(&into_cone);

    // 6-block orders
    let mut row_order: Vec<(usize, usize)> = Vec::new();
    for (ri, &orig) in datum.kept.iter().enumerate() {
        let block = match classify_rel(rel, &cone_bim.basis[orig].name, layer_of[orig]) {
            RelClass::SdBDual(k) => match rel.table_b[k].kind {
                RelGenKind::BCDual(_) => 0,
                _ => 1,
            },
            // the whole shifted A-layer forms one diagonal block: in the
            // localized model the certificate decides the pairing inside it
            RelClass::ShiftA(_) => 2,
            RelClass::SdB(_) => 3,
            RelClass::EB(_) => 4,
            _ => 4,
        };
        row_order.push((block, ri));
    }
    row_order.sort();
    let mut col_order: Vec<(usize, usize)> = Vec::new();
    for (i, b) in res_pb.basis.iter().enumerate() {
        let block = match classify_rel(rel, &b.name, 1) {
            RelClass::EB(_) => 0,
            RelClass::SdB(_) => 1,
            RelClass::SdALevel(_) => 2,
            RelClass::SdBDual(k) => match rel.table_b[k].kind {
                RelGenKind::BFDual(_) => 3,
                _ => 4,
            },
            _ => 4,
        };
        col_order.push((block, i));
    }
    col_order.sort();

    // build the matrix over the reduced rows
    let reduced_res = red.reduced.clone();
    let row_pos: BTreeMap<usize, usize> = row_order
        .iter()
        .enumerate()
        .map(|(pos, (_, i))| (*i, pos))
        .collect();
    let values: Vec<&TwoSidedExpr> = col_order.iter().map(|(_, i)| &composed.values[*i]).collect();
    let rows: Vec<String> = row_order
        .iter()
        .map(|(_, i)| reduced_res.basis[*i].name.display(&rel.pres_b))
        .collect();
    let cols: Vec<String> = col_order
        .iter()
        .map(|(_, i)| format!("({})^", rel.x_b.res.basis[*i].name.display(&rel.pres_b)))
        .collect();
    let matrix = super::verdict_matrix(
        values,
        &row_pos,
        &row_order,
        &col_order,
        rows,
        cols,
        |_j, e| reduced_res.display_two_sided(e),
    )?;
    Ok(RelativePairing { matrix })
}

fn find_shifted_partner(
    rel: &RelCompletion,
    cone_bim: &Bimodule,
    base_sym: &SymName,
) -> Option<usize> {
    // base_sym = D(arrow in Pi_B); find the Pi_A arrow of matching kind and
    // its shifted tilde copy in layer 0
    let arrow_b = match base_sym {
        SymName::D(f) => *f,
        _ => return None,
    };
    let k = rel.table_b.iter().position(|g| g.arrow == arrow_b)?;
    let pa_kind = match &rel.table_b[k].kind {
        RelGenKind::AFDual(f) => NewGenKind::FDual(*f),
        RelGenKind::ACDual(x) => NewGenKind::CDual(*x),
        RelGenKind::AModel(sym) => NewGenKind::ResModel(sym.clone()),
        _ => return None,
    };
    let (pa_arrow, _) = rel.pi_a.arrow_of(&pa_kind)?;
    let want = SymName::sd(pa_arrow).tilde().shifted(1);
    cone_bim.basis.iter().position(|b| b.name == want)
}

/// Computes the correct sign for H on each killed generator so that
/// H delta + delta H = id holds (the cone differential carries layer signs).
fn calibrate_h(
    w: &Arc<Bimodule>,
    kept: Vec<usize>,
    killed: Vec<usize>,
    h: BTreeMap<usize, TwoSidedExpr>,
) -> Result<PerturbationDatum, CykError> {
    let n = w.basis.len();
    let mut is_killed = vec![false; n];
    for &k in &killed {
        is_killed[k] = true;
    }
    let delta = |e: &TwoSidedExpr| -> TwoSidedExpr {
        let mut kill = TwoSidedExpr::zero(e.src(), e.tgt());
        for ((j, l, r), c) in w.d(e).terms() {
            if is_killed[*j] {
                kill.add_term(*j, l.clone(), r.clone(), c.clone());
            }
        }
        kill
    };
    let mut calibrated = BTreeMap::new();
    for (&i, v) in &h {
        if v.is_zero() {
            calibrated.insert(i, v.clone());
            continue;
        }
        // try +v, then -v, and match H(delta(unit)) + delta(H(unit)) = unit
        let mut unit = TwoSidedExpr::zero(w.basis[i].src, w.basis[i].tgt);
        unit.add_term(
            i,
            Path::identity(w.basis[i].tgt),
            Path::identity(w.basis[i].src),
            Rat::one(),
        );
        let mut ok_sign = None;
        for sgn in [Rat::one(), -Rat::one()] {
            let hv = v.scale(&sgn);
            // H(delta(unit)): delta(unit) lives in the zero-H partner slots,
            // so only delta(H(unit)) matters on this generator; test the full
            // relation on the pair exactly in perturb_reduce later; here pick
            // the sign making the diagonal of delta(H(unit)) equal unit.
            let dh = delta(&apply_h_one(w, i, &hv, &unit));
            if dh.sub(&unit).is_zero() || contains_unit(&dh, i) {
                ok_sign = Some(sgn);
                break;
            }
        }
        let sgn = ok_sign.unwrap_or_else(Rat::one);
        calibrated.insert(i, v.scale(&sgn));
    }
    Ok(PerturbationDatum { kept, killed, h: calibrated })
}

fn apply_h_one(
    w: &Bimodule,
    _i: usize,
    hv: &TwoSidedExpr,
    _unit: &TwoSidedExpr,
) -> TwoSidedExpr {
    let _ = w;
    hv.clone()
}

fn contains_unit(e: &TwoSidedExpr, i: usize) -> bool {
    e.terms().any(|((j, l, r), c)| {
        *j == i && l.is_identity() && r.is_identity() && c == &Rat::one()
    })
}

/// Finds the A-side double-X element whose gamma_{F~}-image equals the given
/// target (used to assemble closed relative pairs), by bounded linear solve.
pub fn solve_a_side(
    rel: &RelCompletion,
    target: &TensorElem,
    degree: i64,
    max_len: usize,
) -> Result<TensorElem, CykError> {
    let x_a = XComplex::new(rel.pi_a.pres.clone());
    let induced_a = Arc::new(induce(&rel.f_tilde, &x_a.res, true)?);
    let gamma_ft = crate::bimod::gamma(&rel.f_tilde, &induced_a, &rel.x_b.res)?;
    let unknowns = super::tensor_words(&x_a, degree, max_len);
    let mut col_index: BTreeMap<String, usize> = BTreeMap::new();
    fn intern(ci: &mut BTreeMap<String, usize>, tag: String) -> usize {
        let next = ci.len();
        *ci.entry(tag).or_insert(next)
    }
    let mut rows: Vec<Row> = Vec::new();
    for w in &unknowns {
        let mut e = TensorElem::zero(x_a.res.clone(), x_a.res.clone());
        e.add_term(w.0, w.1.clone(), w.2, w.3.clone(), Rat::one());
        let img = push_tensor(&rel.f_tilde, &gamma_ft, &e, &rel.x_b)?;
        let mut entries: Vec<(usize, Rat)> = Vec::new();
        for (k, c) in img.terms() {
            let tag = format!("{}:{:?}:{}:{:?}", k.0, k.1, k.2, k.3);
            entries.push((intern(&mut col_index, tag), c.clone()));
        }
        rows.push(linalg::row_from_rats(Field::Q, entries));
    }
    let mut rhs_entries: Vec<(usize, Rat)> = Vec::new();
    for (k, c) in target.terms() {
        let tag = format!("{}:{:?}:{}:{:?}", k.0, k.1, k.2, k.3);
        rhs_entries.push((intern(&mut col_index, tag), c.clone()));
    }
    let rhs = linalg::row_from_rats(Field::Q, rhs_entries);
    match linalg::solve(&rows, &rhs) {
        Some(xs) => {
            let mut out = TensorElem::zero(x_a.res.clone(), x_a.res.clone());
            for (w, s) in unknowns.iter().zip(xs) {
                if let crate::scalar::Scalar::Q(q) = s {
                    out.add_term(w.0, w.1.clone(), w.2, w.3.clone(), q);
                }
            }
            Ok(out)
        }
        None => Err(CykError::NoSolutionAtBound { bound: max_len }),
    }
}
