//! Throwaway probe: indicator separation for known chaotic vs regular ICs
//! at alpha = sigma = 1, H0 = 20, with the production pipeline.

use dpchaos::integrate::{integrate, IntegratorConfig};
use dpchaos::ld::{ensemble_indicators, LdConfig};
use dpchaos::model::{ModelParams, PhaseState};
use dpchaos::section::{sample_section_with_stencils, SectionSpec};
use std::time::Instant;

/// Crude two-trajectory largest-Lyapunov estimate.
fn mle(params: &ModelParams, state: &PhaseState, horizon: f64) -> f64 {
    let cfg = IntegratorConfig::default();
    let d0 = 1e-8;
    let renorm = 2.0;
    let mut a = *state;
    let mut b = PhaseState::new(state.theta1 + d0, state.theta2, state.p1, state.p2);
    let mut sum = 0.0;
    let mut t = 0.0;
    while t < horizon {
        let ta = integrate(params, &a, renorm, &cfg, Some(renorm)).unwrap();
        let tb = integrate(params, &b, renorm, &cfg, Some(renorm)).unwrap();
        a = *ta.states.last().unwrap();
        let bend = *tb.states.last().unwrap();
        let diff = [
            bend.theta1 - a.theta1,
            bend.theta2 - a.theta2,
            bend.p1 - a.p1,
            bend.p2 - a.p2,
        ];
        let dist = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
        sum += (dist / d0).ln();
        let scale = d0 / dist;
        b = PhaseState::new(
            a.theta1 + diff[0] * scale,
            a.theta2 + diff[1] * scale,
            a.p1 + diff[2] * scale,
            a.p2 + diff[3] * scale,
        );
        t += renorm;
    }
    sum / t
}

fn main() {
    let params = ModelParams::new(1.0, 1.0).unwrap();
    let spec = SectionSpec::new(params, 20.0).unwrap();
    let cfg = LdConfig::default();

    // 24 sampled ICs: MLE tags them, then full-tau indicators.
    let points = sample_section_with_stencils(&spec, 24, 123, cfg.sigma_i).unwrap();

    let t0 = Instant::now();
    let lams: Vec<f64> = points
        .iter()
        .map(|p| mle(&params, &p.state(), 1000.0))
        .collect();
    println!("mle wall for 24 ics at horizon 1000: {:?}", t0.elapsed());

    let t1 = Instant::now();
    let outcomes = ensemble_indicators(&params, &points, &spec, &cfg);
    let wall = t1.elapsed();
    println!(
        "indicator wall for 24 points (tau=700): {:?} ({:?}/point)",
        wall,
        wall / 24
    );

    println!("lambda  |  log10 D   log10 R   log10 C   log10 S");
    let mut rows: Vec<(f64, f64, f64, f64, f64)> = Vec::new();
    for (lam, out) in lams.iter().zip(outcomes.iter()) {
        match out {
            Ok(set) => {
                rows.push((
                    *lam,
                    set.d.log10(),
                    set.r.log10(),
                    set.c.log10(),
                    set.s.log10(),
                ));
            }
            Err(e) => println!("{lam:7.4} | unclassifiable: {e:?}"),
        }
    }
    rows.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for (lam, d, r, c, s) in rows {
        println!("{lam:7.4} | {d:8.3} {r:9.3} {c:9.3} {s:9.3}");
    }
}
