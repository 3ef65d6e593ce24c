// Synthetic drifting data, its signalling signature, and what the
// projection does to it.

use nsbell::bell::{builtin, canonicalize, evaluate_raw, Builtin};
use nsbell::constraints::build_constraint_system;
use nsbell::data::{frequencies, generate_drift_counts, signalling_report, DriftConfig, DriftMode};
use nsbell::projection::project_l2;
use nsbell::scenario::{deterministic_behavior, uniform_behavior};
use nsbell::{BehaviorVector, Role, Scenario};

fn main() -> nsbell::Result<()> {
    let s = Scenario::new(2, 2)?;
    let system = build_constraint_system(s);
    // Local base with CHSH value 1.2: a deterministic point mixed with noise.
    let det = deterministic_behavior(s, &[vec![0, 0], vec![0, 0]])?;
    let mix = det
        .entries()
        .iter()
        .zip(uniform_behavior(s).entries())
        .map(|(d, u)| 0.6 * d + 0.4 * u)
        .collect();
    let base = BehaviorVector::new(s, mix, Role::Probability)?;
    for drift in [0.0, 0.05, 0.2] {
        let cfg = DriftConfig {
            drift,
            blocks: 4,
            seed: 7,
            mode: DriftMode::Sampled,
            ..DriftConfig::uniform(s, 200_000)
        };
        let (f, _) = frequencies(&generate_drift_counts(&base, &system, &cfg)?)?;
        let report = signalling_report(&f, &system)?;
        let chsh = builtin(Builtin::Chsh)?;
        println!(
            "drift {drift:<4}: max residual {:.2e}, CHSH raw {:+.5}, canonical on p-hat {:+.5}",
            report.max_abs,
            evaluate_raw(&chsh, &f)?.value,
            canonicalize(&chsh).value(&project_l2(&f))?
        );
    }
    Ok(())
}
