use localmps::local_approx::build_part2_detailed;
use localmps::io;
use std::path::Path;
use std::time::Instant;

fn main() {
    let gs = io::mps_from_json(&io::read_json(Path::new("/tmp/tfim64.json")).unwrap()).unwrap();
    for (chi_p, eps) in [(2usize, 0.75f64), (4, 1.0), (8, 1.25)] {
        let t1 = Instant::now();
        match build_part2_detailed(&gs, 2, eps, Some(chi_p)) {
            Ok(b) => {
                let l = b.report.block_length;
                let t = b.report.purifier_length.unwrap();
                let d1 = b.report.measured_local_error.max_value;
                let bound = (2.0 * l as f64).sqrt() * b.report.w_max + (2 + t) as f64 / l as f64 + 1e-6;
                println!("chi'={chi_p} eps={eps}: l={l} t={t} D1={d1:.4} bound={bound:.4} pass={} bond={} cap={} argmax={} [{:?}]",
                    d1 <= bound, b.report.bond_profile.iter().max().unwrap(), 4*l*chi_p*chi_p,
                    b.report.measured_local_error.argmax_window, t1.elapsed());
            }
            Err(e) => println!("chi'={chi_p} eps={eps}: ERROR {e} [{:?}]", t1.elapsed()),
        }
    }
}
