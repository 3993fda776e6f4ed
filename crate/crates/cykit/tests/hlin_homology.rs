//! Truncated homology: the acyclic-cone and free-algebra oracles, the
//! counterexample HH_0 claims, and quasi-isomorphism verdicts.

use cykit::hlin::{
    cyc_homology_dim, homology_dims, quasi_iso_check, truncated_hochschild, HochCoefficient,
    QisoVerdict, Truncation,
};
use cykit::parse::parse_presentation;
use cykit::scalar::Field;
use std::sync::Arc;

#[test]
fn contractible_pair_has_trivial_higher_homology() {
    // k<x, xi> with d(xi) = x: H_0 = k (span of id), H_i = 0 for i >= 1
    let p = Arc::new(
        parse_presentation("object 0\narrow x : 0 -> 0 deg 0\narrow xi : 0 -> 0 deg 1\nd xi = x\n")
            .unwrap(),
    );
    let t = Truncation::new(4, (0, 3), Field::Q);
    let rep = homology_dims(&p, &t, 2);
    for cell in &rep.cells {
        if cell.degree == 0 {
            assert_eq!(cell.dim_homology, 1, "H_0 should be spanned by id");
        } else {
            assert_eq!(cell.dim_homology, 0, "H_{} should vanish", cell.degree);
        }
    }
}

#[test]
fn free_algebra_homology_counts_words() {
    let p = Arc::new(parse_presentation("object 0\narrow x : 0 -> 0 deg 0\n").unwrap());
    let t = Truncation::new(3, (0, 1), Field::Q);
    let rep = homology_dims(&p, &t, 2);
    let h0 = rep.cells.iter().find(|c| c.degree == 0).unwrap();
    assert_eq!(h0.dim_homology, 4); // 1, x, x^2, x^3
    let h1 = rep.cells.iter().find(|c| c.degree == 1).unwrap();
    assert_eq!(h1.dim_homology, 0);
}

#[test]
fn counterexample_hochschild_claims() {
    // HH_0(Pi; Pi) >= 1 and HH_0(Pi; Pi^![2]) = 0 at L = 6
    let p = Arc::new(
        parse_presentation(
            "object 0\narrow x : 0 -> 0 deg 0\narrow y : 0 -> 0 deg 0\narrow t : 0 -> 0 deg 1\nd t = x*y - y*x + x\n",
        )
        .unwrap(),
    );
    let t = Truncation::new(6, (0, 0), Field::Q);
    let (_, _, b_self) = truncated_hochschild(&p, HochCoefficient::SelfBimodule, 0, &t, 1);
    let (space, z, b) = truncated_hochschild(&p, HochCoefficient::SelfBimodule, 0, &t, 1);
    assert!(z >= b, "cycles {} boundaries {}", z, b);
    assert!(z - b >= 1, "HH_0(Pi;Pi) should be nonzero: space {} z {} b {}", space, z, b_self);
    let (_, z2, b2) = truncated_hochschild(&p, HochCoefficient::ShiftedDual(2), 0, &t, 1);
    assert_eq!(z2 - b2, 0, "HH_0(Pi;Pi^![2]) should vanish: z {} b {}", z2, b2);
}

#[test]
fn hochschild_of_free_algebra_matches_brute_force_commutator_quotient() {
    // HH_0(k<x,y>) at length <= L: words modulo cyclic rotation
    let p = Arc::new(
        parse_presentation("object 0\narrow x : 0 -> 0 deg 0\narrow y : 0 -> 0 deg 0\n").unwrap(),
    );
    for max_len in 1..=4usize {
        let t = Truncation::new(max_len, (0, 0), Field::Q);
        let (_, z, b) = truncated_hochschild(&p, HochCoefficient::SelfBimodule, 0, &t, 1);
        // oracle: number of necklaces over a 2-letter alphabet of length <= L
        let necklaces = |n: usize| -> usize {
            // Burnside: (1/n) sum_{d | n} phi(n/d) 2^d
            let phi = |mut m: usize| {
                let mut result = m;
                let mut f = 2;
                while f * f <= m {
                    if m % f == 0 {
                        while m % f == 0 {
                            m /= f;
                        }
                        result -= result / f;
                    }
                    f += 1;
                }
                if m > 1 {
                    result -= result / m;
                }
                result
            };
            let mut total = 0;
            for d in 1..=n {
                if n % d == 0 {
                    total += phi(n / d) * (1usize << d);
                }
            }
            total / n
        };
        let expected: usize = 1 + (1..=max_len).map(necklaces).sum::<usize>();
        assert_eq!(z - b, expected, "HH_0 truncated at {}", max_len);
    }
}

#[test]
fn acyclic_cone_has_zero_cyc_homology() {
    // cone(identity of Res(k<x>)): all homology vanishes
    let p = Arc::new(parse_presentation("object 0\narrow x : 0 -> 0 deg 0\n").unwrap());
    let res = Arc::new(cykit::bimod::standard_resolution(&p));
    let id = cykit::bimod::ChainMap::identity(&res);
    let (cone, _) = cykit::bimod::cone(&id).unwrap();
    let cone = Arc::new(cone);
    let t = Truncation::new(4, (0, 0), Field::Q);
    for deg in 0..=2 {
        let (_, z, b) = cyc_homology_dim(&p, &cone, deg, &t, 2);
        assert_eq!(z - b, 0, "degree {}", deg);
    }
}

#[test]
fn quasi_iso_detects_failure() {
    // k<x> -> k (x -> 0) disagrees at degree 0
    let a = Arc::new(parse_presentation("object 0\narrow x : 0 -> 0 deg 0\n").unwrap());
    let b = Arc::new(parse_presentation("object 0\n").unwrap());
    let f = cykit::pres::FunctorPres::new(
        a.clone(),
        b,
        vec![cykit::quiver::ObjId(0)],
        vec![cykit::expr::NCExpr::zero(cykit::quiver::ObjId(0), cykit::quiver::ObjId(0))],
    )
    .unwrap();
    let t = Truncation::new(4, (0, 1), Field::Q);
    let rep = quasi_iso_check(&f, &t, 2).unwrap();
    assert_eq!(rep.verdict, QisoVerdict::Disagrees);
}

#[test]
fn quasi_iso_accepts_contraction() {
    // k<x, xi; d xi = x> -> k is a quasi-equivalence
    let a = Arc::new(
        parse_presentation("object 0\narrow x : 0 -> 0 deg 0\narrow xi : 0 -> 0 deg 1\nd xi = x\n")
            .unwrap(),
    );
    let b = Arc::new(parse_presentation("object 0\n").unwrap());
    let z = cykit::expr::NCExpr::zero(cykit::quiver::ObjId(0), cykit::quiver::ObjId(0));
    let f = cykit::pres::FunctorPres::new(
        a.clone(),
        b,
        vec![cykit::quiver::ObjId(0)],
        vec![z.clone(), z],
    )
    .unwrap();
    let t = Truncation::new(5, (0, 2), Field::Q);
    let rep = quasi_iso_check(&f, &t, 2).unwrap();
    assert_eq!(rep.verdict, QisoVerdict::Agrees, "{:?}", rep.cells);
}
