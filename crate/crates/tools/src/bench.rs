//! Wall-clock comparison of the centralized run and the full decomposition
//! pipeline over a range of resolutions.

use std::time::Instant;

use cisgraph::pipeline::{centralized, full, FullConfig, StageTiming};
use cisgraph::registry::BuiltinModel;
use cisgraph::{decompose, InputStrategy};

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub divisions: usize,
    /// Best of the repeats, seconds.
    pub centralized: Option<f64>,
    pub pipeline: f64,
    /// Stage timings of the fastest pipeline repeat.
    pub stages: Vec<StageTiming>,
    pub centralized_cells: Option<usize>,
    pub validated_cells: usize,
}

pub struct BenchConfig {
    pub grouping: Vec<Vec<usize>>,
    pub divisions: Vec<usize>,
    pub repeats: usize,
    pub inputs: Option<InputStrategy>,
    /// Skip the centralized run above this many full-grid cells.
    pub centralized_limit: usize,
}

fn time<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let t = Instant::now();
    let out = f();
    (t.elapsed().as_secs_f64(), out)
}

pub fn run(bm: &BuiltinModel, cfg: &BenchConfig) -> cisgraph::Result<Vec<BenchRow>> {
    let model = &bm.model;
    let cascade = bm
        .cascade
        .as_ref()
        .ok_or_else(|| cisgraph::Error::InvalidCascade("model has no cascade blocks".into()))?;
    let d = decompose(model, cascade, &cfg.grouping)?;
    let mut rows = Vec::new();
    for &k in &cfg.divisions {
        let full_cells = (k as u128).pow(model.state_dim() as u32);
        let mut best_c: Option<(f64, usize)> = None;
        if full_cells <= cfg.centralized_limit as u128 {
            for _ in 0..cfg.repeats.max(1) {
                let (s, r) = time(|| centralized(model, &vec![k; model.state_dim()], cfg.inputs));
                let r = r?;
                if best_c.is_none_or(|(b, _)| s < b) {
                    best_c = Some((s, r.cells.len()));
                }
            }
        }
        let fc = FullConfig {
            grouping: cfg.grouping.clone(),
            divisions: d.subsystems().iter().map(|s| vec![k; s.dim()]).collect(),
            inputs: cfg.inputs,
            seeded: true,
        };
        let mut best: Option<(f64, Vec<StageTiming>, usize)> = None;
        for _ in 0..cfg.repeats.max(1) {
            let (s, r) = time(|| full(model, cascade, &fc));
            let r = r?;
            if best.as_ref().is_none_or(|b| s < b.0) {
                best = Some((s, r.timings, r.validated.len()));
            }
        }
        let (pipeline, stages, validated_cells) = best.expect("at least one repeat");
        rows.push(BenchRow {
            divisions: k,
            centralized: best_c.map(|b| b.0),
            pipeline,
            stages,
            centralized_cells: best_c.map(|b| b.1),
            validated_cells,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
