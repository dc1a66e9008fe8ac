use modechoice::estimate::{maximize, EstimationOptions};
use modechoice::likelihood::{DrawAssignment, Model};
use modechoice::synthetic;

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let r: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let fixture = synthetic::rpl_fixture(1301, n, -2.5, 2.8);
    let model = Model::compile(&fixture.spec, &fixture.observations, DrawAssignment::PerPerson).unwrap();
    let draws = model.build_draws(r, 100).unwrap();
    let start = model.layout().start_point();
    let (ll0, g0) = model.loglik_grad(&start, &draws).unwrap();
    eprintln!("start ll={ll0:.4} grad={g0:?}");
    let truth: Vec<f64> = vec![0.5, -0.3, 0.2, -2.5, 2.8];
    let (llt, gt) = model.loglik_grad(&truth, &draws).unwrap();
    eprintln!("truth ll={llt:.4} grad={gt:?}");
    let opts = EstimationOptions { n_draws: r, max_iterations: 60, ..Default::default() };
    let t = std::time::Instant::now();
    let result = maximize(&fixture.spec, &fixture.observations, &opts).unwrap();
    eprintln!(
        "after {} iters ({:?}): converged={} ll={:.4} params={:?} |g|={:.3e}",
        result.iterations, t.elapsed(), result.converged, result.ll_beta, result.parameters, result.gradient_norm
    );
}
