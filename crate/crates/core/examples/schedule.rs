//! Drives two stub training steps through several alternation strategies.

use cxrpair::schedule::{parse_schedule, phase_table, run_schedule};

fn main() {
    for plan in ["joint", "1:1", "2:2", "5:1"] {
        let spec = parse_schedule(plan).unwrap();
        let (mut det_loss, mut gen_loss) = (1.0f64, 1.0f64);
        let trace = run_schedule(
            &spec,
            10,
            |_| {
                det_loss *= 0.9;
                Ok::<_, String>(())
            },
            |_| {
                gen_loss *= 0.8;
                Ok(())
            },
        )
        .unwrap();
        println!(
            "{plan:>5}: {}  (D {} / G {} epochs; stub losses {det_loss:.3} / {gen_loss:.3})",
            trace.sequence(),
            trace.detector_calls,
            trace.generator_calls,
        );
    }
    let trace = run_schedule(&parse_schedule("2:1").unwrap(), 3, |_| Ok::<_, ()>(()), |_| Ok(())).unwrap();
    print!("{}", phase_table(&trace.phases));
}
