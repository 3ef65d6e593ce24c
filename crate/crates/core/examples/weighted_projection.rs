// Projection under a non-uniform settings distribution, as in spot-check
// protocols where one setting dominates.

use nsbell::constraints::build_constraint_system;
use nsbell::data::{frequencies, CountTable};
use nsbell::projection::{project_l2, project_weighted, project_weighted_direct};
use nsbell::Scenario;

fn main() -> nsbell::Result<()> {
    let s = Scenario::new(2, 2)?;
    // About a million trials at xy=00, about a thousand elsewhere.
    let counts = vec![
        400_000, 100_000, 100_000, 400_000, //
        430, 70, 80, 420, //
        420, 80, 90, 410, //
        75, 425, 430, 70,
    ];
    let table = CountTable::from_counts(s, counts)?;
    let (f, pi) = frequencies(&table)?;
    println!("settings weights: {:?}", pi.weights());

    let plain = project_l2(&f);
    let weighted = project_weighted(&f, &pi)?;
    let direct = project_weighted_direct(&f, &pi, &build_constraint_system(s))?;
    println!(
        "closed form vs direct: {:.1e}",
        weighted.max_abs_diff(&direct)
    );

    let block = |v: &nsbell::BehaviorVector, x| v.block(s.setting_rank(x)).to_vec();
    println!("f(.|00)        {:?}", block(&f, &[0, 0]));
    println!("euclidean(.|00) {:?}", block(&plain, &[0, 0]));
    println!("weighted(.|00)  {:?}", block(&weighted, &[0, 0]));
    Ok(())
}
