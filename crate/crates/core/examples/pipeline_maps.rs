// The three exact linear maps behind the projector for (2,2,2).

use nsbell::correlators::CorrelatorKey;
use nsbell::projection::{build_pipeline_maps, RationalMatrix};
use nsbell::Scenario;

fn show(name: &str, m: &RationalMatrix) {
    println!("{name} ({}x{}):", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|r| format!("{r:>4}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> nsbell::Result<()> {
    let s = Scenario::new(2, 2)?;
    let maps = build_pipeline_maps(s);
    show("T1", &maps.t1);
    show("T2", &maps.t2);
    show("T3", &maps.t3);

    let keys: Vec<String> = (0..s.correlator_count())
        .map(|r| CorrelatorKey::from_rank(s, r).to_string())
        .collect();
    println!("correlator order: {}", keys.join(", "));

    let p = maps.composite();
    println!("P = T3 T2 T1 idempotent: {}", p.mul(&p) == p);
    Ok(())
}
