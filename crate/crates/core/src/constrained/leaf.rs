use serde::{Deserialize, Serialize};

use crate::tree::TrainMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafModel {
    /// Constant leaf: `beta = 0`, `alpha` = leaf mean.
    Mean,
    /// Per-leaf `alpha + beta * surface`.
    #[default]
    SurfaceLinear,
    /// Per-leaf `alpha` with one `beta` shared by every leaf.
    GlobalSurface,
}

/// `alpha + beta * surface`, with `alpha >= 0` and `beta >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafLinear {
    pub alpha: f64,
    pub beta: f64,
    pub support: usize,
}

impl LeafLinear {
    #[inline]
    pub fn predict(&self, surface: f64) -> f64 {
        self.alpha + self.beta * surface
    }
}

/// Least squares of `targets` on `surfaces` over the quadrant
/// `alpha >= 0, beta >= 0`.
///
/// A negative slope (or no surface variation) gives `beta = 0` and
/// `alpha` = mean. If the unconstrained intercept is negative the fit
/// falls back to the best line through the origin, so the leaf never
/// predicts below zero.
pub fn fit_leaf_linear(surfaces: &[f64], targets: &[f64]) -> LeafLinear {
    let n = surfaces.len();
    assert_eq!(n, targets.len());
    assert!(n > 0, "leaf without examples");
    let nf = n as f64;
    let s_mean = surfaces.iter().sum::<f64>() / nf;
    let y_mean = targets.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (s, y) in surfaces.iter().zip(targets) {
        let ds = s - s_mean;
        sxx += ds * ds;
        sxy += ds * (y - y_mean);
    }
    let flat = LeafLinear {
        alpha: y_mean.max(0.0),
        beta: 0.0,
        support: n,
    };
    if sxx <= 0.0 || sxy <= 0.0 {
        return flat;
    }
    let beta = sxy / sxx;
    let alpha = y_mean - beta * s_mean;
    if alpha >= 0.0 {
        return LeafLinear {
            alpha,
            beta,
            support: n,
        };
    }
    let (mut ss, mut sy) = (0.0, 0.0);
    for (s, y) in surfaces.iter().zip(targets) {
        ss += s * s;
        sy += s * y;
    }
    let through_origin = LeafLinear {
        alpha: 0.0,
        beta: if ss > 0.0 { (sy / ss).max(0.0) } else { 0.0 },
        support: n,
    };
    let sse = |l: &LeafLinear| -> f64 {
        surfaces
            .iter()
            .zip(targets)
            .map(|(s, y)| (y - l.predict(*s)).powi(2))
            .sum()
    };
    if sse(&through_origin) < sse(&flat) {
        through_origin
    } else {
        flat
    }
}

/// Fits every leaf in `leaves` and returns the fits with their total SSE.
pub(crate) fn fit_leaves(
    m: &TrainMatrix,
    surface_slot: usize,
    leaves: &[&[u32]],
    model: LeafModel,
) -> (Vec<LeafLinear>, f64) {
    let gather = |rows: &[u32]| -> (Vec<f64>, Vec<f64>) {
        rows.iter().map(|&r| (m.value(r, surface_slot), m.target(r))).unzip()
    };
    let fits: Vec<LeafLinear> = match model {
        LeafModel::Mean => leaves
            .iter()
            .map(|rows| LeafLinear {
                alpha: rows.iter().map(|&r| m.target(r)).sum::<f64>() / rows.len() as f64,
                beta: 0.0,
                support: rows.len(),
            })
            .collect(),
        LeafModel::SurfaceLinear => leaves
            .iter()
            .map(|rows| {
                let (s, y) = gather(rows);
                fit_leaf_linear(&s, &y)
            })
            .collect(),
        LeafModel::GlobalSurface => fit_global(m, surface_slot, leaves),
    };
    let sse = leaves
        .iter()
        .zip(&fits)
        .map(|(rows, leaf)| {
            rows.iter()
                .map(|&r| (m.target(r) - leaf.predict(m.value(r, surface_slot))).powi(2))
                .sum::<f64>()
        })
        .sum();
    (fits, sse)
}

/// Shared slope: the pooled within-leaf regression slope, clamped to
/// `[0, min over leaves of mean / mean surface]` so every intercept stays
/// non-negative. The profiled objective is a convex parabola in `beta`,
/// so clamping gives the constrained optimum.
fn fit_global(m: &TrainMatrix, surface_slot: usize, leaves: &[&[u32]]) -> Vec<LeafLinear> {
    let means: Vec<(f64, f64)> = leaves
        .iter()
        .map(|rows| {
            let n = rows.len() as f64;
            let s = rows.iter().map(|&r| m.value(r, surface_slot)).sum::<f64>() / n;
            let y = rows.iter().map(|&r| m.target(r)).sum::<f64>() / n;
            (s, y)
        })
        .collect();
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (rows, (s_mean, y_mean)) in leaves.iter().zip(&means) {
        for &r in rows.iter() {
            let ds = m.value(r, surface_slot) - s_mean;
            sxx += ds * ds;
            sxy += ds * (m.target(r) - y_mean);
        }
    }
    let mut beta = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    for (s_mean, y_mean) in &means {
        if *s_mean > 0.0 {
            beta = beta.min((y_mean / s_mean).max(0.0));
        }
    }
    leaves
        .iter()
        .zip(&means)
        .map(|(rows, (s_mean, y_mean))| LeafLinear {
            alpha: (y_mean - beta * s_mean).max(0.0),
            beta,
            support: rows.len(),
        })
        .collect()
}
