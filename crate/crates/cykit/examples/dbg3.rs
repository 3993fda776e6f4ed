use cykit::topo::*;
use cykit::parse::print_presentation;
fn main() {
    let pair = StratifiedPair {
        components: vec![PairComponent {
            descriptor: SpaceDescriptor::Sphere { z_degree: 0 },
            peripheral: [
                ("mu".to_string(), "T1".to_string()),
                ("lambda".to_string(), "id_pt".to_string()),
            ].into_iter().collect(),
        }],
        complement: SpaceDescriptor::GroupPresentation { generators: vec!["T1".into()], relators: vec![] },
        ambient: 3,
        outer_boundary: None,
    };
    let th = perverse_thickened(&pair).unwrap();
    println!("{}", print_presentation(&th.pres));
    println!("d2: {}", th.pres.check_differential().pass);
}
