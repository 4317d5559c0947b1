use super::{AutodiffError, Graph, ParamStore, Tensor, Var};

/// Step used by the central-difference checks.
pub const FD_STEP: f64 = 1e-5;

/// Gradient magnitudes below `REL_FLOOR * max(1, |f|)` are compared
/// absolutely. Central differences of a function of size `|f|` carry
/// roundoff near `|f| * 1e-16 / FD_STEP` per operation, and deep graphs
/// accumulate several times that, so the floor grows with `|f|`.
pub const REL_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(input or parameter index, element index)` of the worst element.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheck {
    fn record(&mut self, slot: usize, elem: usize, analytic: f64, numeric: f64, floor: f64) {
        let e = relative_error(analytic, numeric, floor);
        self.checked += 1;
        if e > self.max_rel_error || self.worst.is_none() {
            self.max_rel_error = e;
            self.worst = Some((slot, elem));
            self.analytic = analytic;
            self.numeric = numeric;
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

fn eval_scalar<F>(inputs: &[Tensor], f: &F) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, AutodiffError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    Ok(g.value(out).item())
}

/// Checks the gradient of a scalar function of `inputs` against central
/// differences with step `eps`.
pub fn check_inputs<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<GradCheck, AutodiffError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, AutodiffError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let floor = REL_FLOOR * g.value(out).item().abs().max(1.0);
    let mut report = GradCheck::default();
    let mut probe = inputs.to_vec();
    for (slot, var) in vars.iter().enumerate() {
        let analytic = g.grad(*var).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[slot].len()]);
        for (e, &a) in analytic.iter().enumerate() {
            let orig = inputs[slot].data()[e];
            probe[slot].data_mut()[e] = orig + eps;
            let up = eval_scalar(&probe, &f)?;
            probe[slot].data_mut()[e] = orig - eps;
            let down = eval_scalar(&probe, &f)?;
            probe[slot].data_mut()[e] = orig;
            report.record(slot, e, a, (up - down) / (2.0 * eps), floor);
        }
    }
    Ok(report)
}

/// Same as [`check_inputs`] over every element of every parameter in
/// `store`, for a loss built from stored parameters.
pub fn check_params<F>(store: &ParamStore, eps: f64, f: F) -> Result<GradCheck, AutodiffError>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var, AutodiffError>,
{
    let mut g = Graph::new();
    let out = f(&mut g, store)?;
    g.backward(out)?;
    let floor = REL_FLOOR * g.value(out).item().abs().max(1.0);
    let mut work = store.clone();
    work.zero_grads();
    work.accumulate(&g);
    let analytic: Vec<Vec<f64>> = (0..store.len()).map(|i| work.grad_at(i).to_vec()).collect();
    let mut report = GradCheck::default();
    let eval = |s: &ParamStore| -> Result<f64, AutodiffError> {
        let mut g = Graph::new();
        let out = f(&mut g, s)?;
        Ok(g.value(out).item())
    };
    for (slot, grads) in analytic.iter().enumerate() {
        for (e, &a) in grads.iter().enumerate() {
            let orig = store.value_at(slot).data()[e];
            work.value_at_mut(slot).data_mut()[e] = orig + eps;
            let up = eval(&work)?;
            work.value_at_mut(slot).data_mut()[e] = orig - eps;
            let down = eval(&work)?;
            work.value_at_mut(slot).data_mut()[e] = orig;
            report.record(slot, e, a, (up - down) / (2.0 * eps), floor);
        }
    }
    Ok(report)
}
