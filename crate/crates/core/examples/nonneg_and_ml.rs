// When the projection leaves the probability simplex: nonnegative
// refinement and the maximum-likelihood estimate.

use nsbell::constraints::build_constraint_system;
use nsbell::data::{frequencies, table1};
use nsbell::projection::{estimate_ml, ml_objective, project_l2, project_nonneg, SettingsWeights};
use nsbell::{BehaviorVector, Role, Scenario};

fn main() -> nsbell::Result<()> {
    let s = Scenario::new(2, 2)?;
    let system = build_constraint_system(s);

    // Party 1 reports party 2's setting: as signalling as it gets.
    let mut e = vec![0.0; s.dim()];
    for xr in 0..s.setting_blocks() {
        let x = s.setting_tuple(xr);
        e[s.encode_index(&[x[1] as u8, 0], &x)?] = 1.0;
    }
    let f = BehaviorVector::new(s, e, Role::Frequency)?;
    println!("projection min entry {:.4}", project_l2(&f).min_entry());
    let p = project_nonneg(&f, &system)?;
    println!(
        "refined min entry {:.1e}, residual {:.1e}",
        p.min_entry(),
        system.residual(&p)?.max_abs()
    );

    let pi = SettingsWeights::uniform(s);
    let ml = estimate_ml(&f, &pi, &system)?;
    println!(
        "log-likelihood: refined {:.6}, ML {:.6}",
        ml_objective(&f, &pi, &p)?,
        ml_objective(&f, &pi, &ml)?
    );

    let (f, pi) = frequencies(&table1())?;
    let ml = estimate_ml(&f, &pi, &system)?;
    let l2 = project_nonneg(&f, &system)?;
    println!(
        "TABLE1: ML {:.9} vs L2 {:.9}, entries differ by at most {:.2e}",
        ml_objective(&f, &pi, &ml)?,
        ml_objective(&f, &pi, &l2)?,
        ml.max_abs_diff(&l2)
    );
    Ok(())
}
