// Scratch: magnitudes at benchmark scale, per-interval deviation profile.
use ftlcr_core::experiments::metrics::*;
use ftlcr_core::experiments::paths::*;
use ftlcr_core::forward_model::*;
use ftlcr_core::interpolation::*;
use ftlcr_core::planner::*;
use ftlcr_core::shape_library::*;
use std::time::Instant;

fn main() {
    let model = PccModel::new(ModelSpec::default()).unwrap();
    let t0 = Instant::now();
    let lib = generate_library(&model, &Bounds::symmetric(std::f64::consts::FRAC_PI_2), 20000, 7);
    println!("libgen: {:.1}s", t0.elapsed().as_secs_f64());
    let opts = PlanOptions::default();

    for class in [PathClass::C, PathClass::S, PathClass::Robot] {
        let mut devs = Vec::new();
        let mut sparse_devs = Vec::new();
        let mut profile = vec![0.0f64; 9];
        let t0 = Instant::now();
        for i in 0..4usize {
            let seed = path_seed(11, class, i);
            let path = generate_path(class, seed, 10, &model);
            let sparse = plan_sparse(&lib, None, &path, &opts).unwrap();
            sparse_devs.push(sparse.mean_deviation() / 3.0 * 100.0);
            let aligned = prealign_radial(&sparse, &SymmetryDescriptor::Continuous, &lib);
            let dense = interpolate(&aligned, &path, 10, &model).unwrap();
            let detail = eval_plan(&dense, &path, &model, &opts).unwrap();
            devs.push(detail.metrics.shape_dev_pct);
            for (si, d) in detail.step_shape_dev.iter().enumerate() {
                let interval = if si == 0 { 0 } else { (si - 1) / 10 };
                profile[interval] += d / 3.0 * 100.0;
            }
        }
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        println!("{class}: dense {:.3}%  sparse {:.3}%  ({:.1}s/4 paths)", mean(&devs), mean(&sparse_devs), t0.elapsed().as_secs_f64());
        print!("  per-interval mean dev%: ");
        for p in &profile { print!("{:.2} ", p / (4.0 * 10.0)); }
        println!();
    }
}
