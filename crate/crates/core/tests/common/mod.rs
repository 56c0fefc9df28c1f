#![allow(dead_code)]

use relcrawl::model::{Crawler, CrawlerParams};
use relcrawl::reduction::{PlanarReduction, SpatialReduction};

pub fn planar(p: CrawlerParams) -> PlanarReduction {
    PlanarReduction::new(Crawler::planar(p).unwrap()).unwrap()
}

pub fn standard_planar() -> PlanarReduction {
    planar(CrawlerParams::standard())
}

pub fn standard_spatial() -> SpatialReduction {
    SpatialReduction::new(Crawler::spatial(CrawlerParams::spatial_default()).unwrap()).unwrap()
}

/// Derivative-free Nelder–Mead minimizer with restarts. Infeasible points
/// (errors) count as +∞.
pub fn nelder_mead<F: Fn(&[f64]) -> Option<f64>>(f: F, x0: &[f64], step: f64, restarts: usize) -> Vec<f64> {
    let n = x0.len();
    let eval = |x: &[f64]| f(x).unwrap_or(f64::INFINITY);
    let mut best = x0.to_vec();
    let mut scale = step;
    for _ in 0..restarts {
        let mut simplex: Vec<Vec<f64>> = vec![best.clone()];
        for i in 0..n {
            let mut v = best.clone();
            v[i] += scale;
            simplex.push(v);
        }
        let mut vals: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
        for _ in 0..20_000 {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();
            let spread = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread < 1e-12 {
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
            let along =
                |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
            let xr = along(-1.0);
            let fr = eval(&xr);
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    vals[n] = fe;
                } else {
                    simplex[n] = xr;
                    vals[n] = fr;
                }
            } else if fr < vals[n - 1] {
                simplex[n] = xr;
                vals[n] = fr;
            } else {
                let (xc, fc) = if fr < vals[n] {
                    let x = along(-0.5);
                    let v = eval(&x);
                    (x, v)
                } else {
                    let x = along(0.5);
                    let v = eval(&x);
                    (x, v)
                };
                if fc < vals[n].min(fr) {
                    simplex[n] = xc;
                    vals[n] = fc;
                } else {
                    for i in 1..=n {
                        for j in 0..n {
                            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                        }
                        vals[i] = eval(&simplex[i]);
                    }
                }
            }
        }
        let i = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        best = simplex[i].clone();
        scale *= 0.1;
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
