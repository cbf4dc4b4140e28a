use sumindex::bench::run_grid;
use sumindex::Mode;

fn main() {
    let grid = [64usize, 128, 256, 512, 1024];
    let seeds = [1u64, 2, 3];
    for &mode in &[Mode::General, Mode::Random] {
        let report = run_grid(3, 0.75, mode, &grid, &seeds, 400, 4).unwrap();
        println!("== mode {mode}: space_slope={:.4} steps_slope={:.4}",
            report.fitted_space_slope, report.fitted_steps_slope);
        for r in &report.rows {
            println!("  n={} seed={} stored={} ratio={:.3} mean_steps={:.1} max_steps={} L={} retries={} {:.1}s",
                r.n, r.seed, r.stored_words,
                r.stored_words as f64 / (r.n * r.n) as f64,
                r.mean_query_steps, r.max_query_steps, r.l, r.retries, r.build_seconds);
        }
    }
}
