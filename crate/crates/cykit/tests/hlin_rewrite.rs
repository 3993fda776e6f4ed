//! Rewriting: H_0 presentations, normal forms, and the inverse identity of
//! the multiplicative preprojective relations.

use cykit::hlin::h0_presentation;
use cykit::parse::parse_presentation;
use cykit::scalar::Field;
use std::sync::Arc;

#[test]
fn h0_of_free_presentation_is_itself() {
    let p = Arc::new(
        parse_presentation("object 0\narrow x : 0 -> 0 deg 0\narrow y : 0 -> 0 deg 0\n").unwrap(),
    );
    let h = h0_presentation(&p, 8, Field::Q).unwrap();
    assert!(h.relations.is_empty());
    assert!(h.complete);
    assert_eq!(h.dimension_sequence(3), vec![1, 3, 7, 15]);
}

#[test]
fn preprojective_inverse_identity() {
    // H_0 presentation: mu, T inverted; a, as; relations mu = as*a + 1,
    // T = a*as + 1. Then (1 + as*a)(1 - as*T^-1*a) normalizes to id.
    let text = "\
object 1
object 0
arrow mu : 1 -> 1 deg 0 inverted
arrow T : 0 -> 0 deg 0 inverted
arrow a : 1 -> 0 deg 0
arrow as : 0 -> 1 deg 0
arrow xi : 1 -> 1 deg 1
arrow xip : 0 -> 0 deg 1
d xi = mu - as*a - id_1
d xip = T - a*as - id_0
";
    let p = Arc::new(parse_presentation(text).unwrap());
    let h = h0_presentation(&p, 8, Field::Q).unwrap();
    assert!(h.complete, "completion should terminate");
    // relation set normalizes to {mu - as*a - 1, T - a*as - 1}
    assert_eq!(h.relations.len(), 2);
    // the inverse identity
    let alph = &h.pres.alph;
    let e = cykit::parse::parse_expr(alph, "id_1 + as*a", None).unwrap();
    let f = cykit::parse::parse_expr(alph, "id_1 - as*T^-1*a", None).unwrap();
    let prod = e.mul(alph, &f).unwrap();
    let nf = h.normal_form(&prod);
    let id = cykit::expr::NCExpr::identity(cykit::quiver::ObjId(0));
    assert!(
        nf.sub(&id).unwrap().is_zero(),
        "normal form is {}",
        nf.display(alph)
    );
}

#[test]
fn h0_dimension_sequence_stable_under_field() {
    let text = "\
object 1
object 0
arrow mu : 1 -> 1 deg 0 inverted
arrow T : 0 -> 0 deg 0 inverted
arrow a : 1 -> 0 deg 0
arrow as : 0 -> 1 deg 0
arrow xi : 1 -> 1 deg 1
arrow xip : 0 -> 0 deg 1
d xi = mu - as*a - id_1
d xip = T - a*as - id_0
";
    let p = Arc::new(parse_presentation(text).unwrap());
    let hq = h0_presentation(&p, 8, Field::Q).unwrap();
    let hp = h0_presentation(&p, 8, Field::Fp(32003)).unwrap();
    assert_eq!(hq.dimension_sequence(6), hp.dimension_sequence(6));
}
