use localmps::local_approx::build_part2_detailed;
use localmps::io;
use std::path::Path;

fn main() {
    let gs = io::mps_from_json(&io::read_json(Path::new("/tmp/tfim64.json")).unwrap()).unwrap();
    let b = build_part2_detailed(&gs, 2, 1.5, Some(2)).unwrap();
    for &(s, e) in &b.report.measured_local_error.per_window {
        print!("{s}:{e:.3} ");
    }
    println!();
    println!("argmax {} splits {:?}", b.report.measured_local_error.argmax_window, b.layout.splits.as_ref().map(|s| &s[..2.min(s.len())]));
}
