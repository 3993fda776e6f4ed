use cykit::topo::*;
use cykit::parse::print_presentation;
fn main() {
    // the S1 neighborhood at n = 3
    let nb = perverse_neighborhood(&SpaceDescriptor::Sphere { z_degree: 0 }, 3).unwrap();
    println!("=== I_3(S1) ===\n{}", print_presentation(&nb.rel.pres_b));
    println!("boundary: \n{}", print_presentation(&nb.boundary));
    // the framed unknot link pair (framing 0): complement = solid torus
    let pair = StratifiedPair {
        components: vec![PairComponent {
            descriptor: SpaceDescriptor::Sphere { z_degree: 0 },
            peripheral: [
                ("mu".to_string(), "T1".to_string()),
                ("lambda".to_string(), "id_pt".to_string()),
            ].into_iter().collect(),
        }],
        complement: SpaceDescriptor::GroupPresentation {
            generators: vec!["T1".into()],
            relators: vec![],
        },
        ambient: 3,
        outer_boundary: None,
    };
    match perverse_thickened(&pair) {
        Ok(th) => {
            println!("=== A(R3, unknot) ===\n{}", print_presentation(&th.pres));
            println!("d2: {}", th.pres.check_differential().pass);
        }
        Err(e) => println!("ERROR: {}", e),
    }
}
