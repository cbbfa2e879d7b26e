//! End-to-end acceptance run: every numbered criterion prints one
//! pass/fail line, and the test fails if any asserted criterion fails.

use feig_cli::checks::{run_suites, Suite};
use feig_core::map::solve_feigenbaum;

const CRITERIA: [(usize, &str, &str); 19] = [
    (1, "fixed-point-residual", "sup residual of the fixed-point equation"),
    (2, "alpha-oracle", "solver alpha vs cascade oracle"),
    (3, "inverse-functional-equation", "inverse-branch functional equation"),
    (4, "singular-point", "singular point is a chi fixed point in the sector"),
    (5, "omega-meeting-angles", "boundary arcs meet at pi/r"),
    (6, "carrier-invariance-disjointness", "IFS invariance, disjointness, adjacency"),
    (7, "l-self-similarity", "curve self-similarity under |alpha|"),
    (8, "limit-arc-simple", "limit arc has no self-intersections"),
    (9, "g-maps-l0-to-tail", "forward image of the base window"),
    (10, "depth1-census-and-pairs", "depth-1 census and pair classification"),
    (11, "rescale-pullback-consistency", "rescale vs pullback consistency"),
    (12, "tiling-coverage", "disc coverage by the generated tiling"),
    (13, "nested-chain-decay", "diameter decay along nested chains"),
    (14, "vein-path-bound", "vein path length bound with stable constant"),
    (15, "external-ray-scaling", "external ray scaling consistency"),
    (16, "bowen-bracket", "Bowen-root bracket vs box counting"),
    (17, "conformal-measure", "conformal measure mass and residuals"),
    (18, "frostman-stability", "Frostman ratio stability"),
    (19, "m-condition-stability", "M-condition estimate stability"),
];

#[test]
fn acceptance_criteria() {
    let map = solve_feigenbaum(2, 40, 1e-12).expect("solver");
    let records = run_suites(
        &map,
        &[Suite::Core, Suite::Ifs, Suite::Markov, Suite::Dim],
        7,
    );

    let mut failed = Vec::new();
    for (num, name, what) in CRITERIA {
        let rec = records
            .iter()
            .find(|r| r.name == name)
            .unwrap_or_else(|| panic!("no check named {name}"));
        let ok = rec.passed();
        println!(
            "criterion {num:2}: {} — {what} ({name})",
            if ok { "pass" } else { "fail" }
        );
        if !ok {
            failed.push(num);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
