// Canonical forms of the built-in inequalities and their local bounds.

use nsbell::bell::{builtin, canonicalize, local_bound, Builtin};

fn main() -> nsbell::Result<()> {
    let all = [
        Builtin::Chsh,
        Builtin::Mermin,
        Builtin::Tilted {
            alpha: 2.0,
            beta: 1.0,
        },
        Builtin::I3322,
        Builtin::LosrGtnl,
    ];
    for which in all {
        let form = canonicalize(&builtin(which)?);
        let (value, strategy) = local_bound(&form);
        println!(
            "{which}: bound {} (local max {value} at {strategy:?})",
            form.bound
        );
        let s = form.scenario;
        for xr in 0..s.setting_blocks() {
            let x = s.setting_tuple(xr);
            let block = form.block(&x)?;
            if block.iter().any(|g| *g != 0.0) {
                let cells: Vec<String> = block.iter().map(|g| format!("{g:.4}")).collect();
                println!("  p{x:?}: [{}]", cells.join(", "));
            }
        }
    }

    // Round trip through JSON; thirds are written as "p/q" strings.
    let i3322 = canonicalize(&builtin(Builtin::I3322)?);
    let text = serde_json::to_string(&i3322)?;
    let back: nsbell::bell::BellExpression = serde_json::from_str(&text)?;
    assert_eq!(canonicalize(&back).gamma, i3322.gamma);
    println!("I3322 canonical JSON: {} bytes", text.len());
    Ok(())
}
