// sign search for the bar boundary: patch consts via recompile is slow, so
// reimplement boundary inline with knobs
use cykit::bar::*;
use cykit::parse::parse_presentation;
use cykit::quiver::{Gen, ObjId, Path};
use cykit::scalar::Rat;
use num::One;
use std::sync::Arc;
fn main() {
    let a = Arc::new(parse_presentation("object 0\narrow x : 0 -> 0 deg 0\narrow t : 0 -> 0 deg 1\nd t = x*x\n").unwrap());
    let u = unit_presentation();
    let x = a.alph.quiver.arrow("x").unwrap();
    let t = a.alph.quiver.arrow("t").unwrap();
    let px = Path::gen(&a.alph, Gen::plain(x));
    let pt = Path::gen(&a.alph, Gen::plain(t));
    let iu = Path::identity(ObjId(0));
    for word in [
        vec![(px.clone(), iu.clone()), (pt.clone(), iu.clone())],
        vec![(pt.clone(), iu.clone()), (px.clone(), iu.clone()), (pt.clone(), iu.clone())],
        vec![(iu.clone(), iu.clone()), (pt.clone(), iu.clone()), (pt.clone(), iu.clone())],
    ] {
        let mut c = BarChain::zero(a.clone(), u.clone(), 5);
        c.add_term(word.clone(), Rat::one()).unwrap();
        let bb = c.boundary().boundary();
        println!("word len {}: b^2 zero: {}", word.len(), bb.is_zero());
    }
}
