use std::fmt;

/// A collection of named, flat parameter blocks.
///
/// Models and their gradient buffers share the same block layout, which is
/// what lets the gradient checker, the optimizer and the checkpoint writer
/// walk them uniformly.
pub trait ParamSet {
    fn block_count(&self) -> usize;
    fn block_name(&self, index: usize) -> String;
    fn block(&self, index: usize) -> &[f64];
    fn block_mut(&mut self, index: usize) -> &mut [f64];

    fn param_count(&self) -> usize {
        (0..self.block_count()).map(|i| self.block(i).len()).sum()
    }
}

impl ParamSet for Vec<Vec<f64>> {
    fn block_count(&self) -> usize {
        self.len()
    }

    fn block_name(&self, index: usize) -> String {
        format!("block{index}")
    }

    fn block(&self, index: usize) -> &[f64] {
        &self[index]
    }

    fn block_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self[index]
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.max_rel_error <= self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockReport> {
        self.blocks
            .iter()
            .filter(|b| b.max_rel_error > self.tolerance)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            let flag = if b.max_rel_error <= self.tolerance {
                "ok"
            } else {
                "FAIL"
            };
            writeln!(
                f,
                "{:<32} {:>10.3e}  [{}] analytic={:+.6e} numeric={:+.6e} {flag}",
                b.name, b.max_rel_error, b.worst_index, b.analytic, b.numeric
            )?;
        }
        write!(
            f,
            "max relative error {:.3e} (tol {:.1e})",
            self.max_rel_error(),
            self.tolerance
        )
    }
}

/// Compares `analytic` against central differences of `loss_fn` around
/// `params`, one coordinate at a time. Every coordinate is restored to its
/// exact original value after probing.
pub fn grad_check<P, G, F>(
    params: &mut P,
    analytic: &G,
    mut loss_fn: F,
    h: f64,
    tol: f64,
) -> GradCheckReport
where
    P: ParamSet,
    G: ParamSet,
    F: FnMut(&P) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(params.block_count(), analytic.block_count());
    let mut blocks = Vec::with_capacity(params.block_count());
    for b in 0..params.block_count() {
        assert_eq!(params.block(b).len(), analytic.block(b).len());
        let mut report = BlockReport {
            name: params.block_name(b),
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..params.block(b).len() {
            let original = params.block(b)[i];
            params.block_mut(b)[i] = original + h;
            let plus = loss_fn(params);
            params.block_mut(b)[i] = original - h;
            let minus = loss_fn(params);
            params.block_mut(b)[i] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.block(b)[i];
            let err = relative_error(a, numeric);
            if err > report.max_rel_error || i == 0 {
                report.max_rel_error = err;
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
        blocks.push(report);
    }
    GradCheckReport {
        blocks,
        tolerance: tol,
    }
}
