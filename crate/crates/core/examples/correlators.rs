// Uniformly averaged correlators and the inverse map.

use nsbell::correlators::{probabilities_from_correlators, settingwise_correlators, umc};
use nsbell::projection::project_l2;
use nsbell::{BehaviorVector, PartySubset, Role, Scenario};

fn main() -> nsbell::Result<()> {
    let s = Scenario::new(2, 2)?;
    // PR box: a XOR b = x AND y.
    let mut e = vec![0.0; s.dim()];
    for xr in 0..s.setting_blocks() {
        let x = s.setting_tuple(xr);
        for a in 0..2u8 {
            let b = a ^ (x[0] * x[1]) as u8;
            e[s.encode_index(&[a, b], &x)?] = 0.5;
        }
    }
    let pr = BehaviorVector::new(s, e, Role::Probability)?;

    for (key, value) in umc(&pr).iter() {
        println!("{key} = {value}");
    }
    let back = probabilities_from_correlators(&umc(&pr));
    println!("round trip error {:.1e}", back.max_abs_diff(&pr));

    // A signalling vector: marginal correlators depend on the remote setting
    // until projected.
    let mut f = pr.entries().to_vec();
    f[s.encode_index(&[0, 0], &[0, 1])?] += 0.1;
    f[s.encode_index(&[1, 1], &[0, 1])?] -= 0.1;
    let f = BehaviorVector::new(s, f, Role::Frequency)?;
    let one = PartySubset::new(&[1], 2)?;
    let sw = settingwise_correlators(&f);
    let swp = settingwise_correlators(&project_l2(&f));
    for y in 0..2 {
        println!(
            "C^1 at x=(0,{y}): raw {:.3}, projected {:.3}",
            sw.get(one, &[0, y])?,
            swp.get(one, &[0, y])?
        );
    }
    Ok(())
}
