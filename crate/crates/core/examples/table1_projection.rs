// TABLE1 end to end: signalling diagnostics, projection, and CHSH before
// and after.

use nsbell::bell::{builtin, canonicalize, evaluate_raw, Builtin};
use nsbell::constraints::build_constraint_system;
use nsbell::data::{frequencies, marginal, signalling_report, table1};
use nsbell::projection::project_l2;

fn main() -> nsbell::Result<()> {
    let counts = table1();
    let (f, _pi) = frequencies(&counts)?;
    let system = build_constraint_system(f.scenario());

    let m00 = marginal(&f, &[1], &[0], &[0, 0])?;
    let m01 = marginal(&f, &[1], &[0], &[0, 1])?;
    println!("P(a=0|x=0,y=0) = {m00:.4e}, P(a=0|x=0,y=1) = {m01:.4e}");

    let report = signalling_report(&f, &system)?;
    if let Some(w) = &report.worst {
        println!(
            "largest no-signalling residual: {} = {:.3e}",
            w.label, w.residual
        );
    }

    let p = project_l2(&f);
    println!(
        "after projection: residual {:.1e}, min entry {:.4e}",
        system.residual(&p)?.max_abs(),
        p.min_entry()
    );

    let chsh = builtin(Builtin::Chsh)?;
    let form = canonicalize(&chsh);
    println!(
        "CHSH as written on f:    {:.12}",
        evaluate_raw(&chsh, &f)?.value
    );
    println!("canonical CHSH on f:     {:.12}", form.value(&f)?);
    println!("canonical CHSH on p-hat: {:.12}", form.value(&p)?);
    Ok(())
}
