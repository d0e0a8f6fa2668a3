use super::{ParamStore, Scalar};
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so entries whose true gradient
/// is zero are judged by absolute error instead of dividing noise by noise.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-5;

/// Worst mismatch found by [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences `(L(θ+eps) - L(θ-eps)) / 2eps` for every entry of every slot.
///
/// `loss_fn` returns the loss and its gradient with the same layout as
/// `params`.
pub fn grad_check<T, F>(loss_fn: F, params: &ParamStore<T>, eps: T) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&ParamStore<T>) -> Result<(T, ParamStore<T>)>,
{
    if !(eps > T::zero()) {
        return Err(Error::Domain("finite-difference step must be positive".into()));
    }
    let (loss, analytic) = loss_fn(params)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss is {loss} at the base point")));
    }
    params.check_compatible(&analytic)?;

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in &names {
        let grad = analytic.get(name).expect("checked compatible");
        for idx in 0..grad.len() {
            let orig = params.get(name).expect("present").as_slice()[idx];
            let mut eval = |v: T| -> Result<T> {
                probe.get_mut(name).expect("present").as_mut_slice()[idx] = v;
                let (l, _) = loss_fn(&probe)?;
                if !l.is_finite() {
                    return Err(Error::Numeric(format!("loss is {l} while perturbing `{name}`[{idx}]")));
                }
                Ok(l)
            };
            let plus = eval(orig + eps)?;
            let minus = eval(orig - eps)?;
            probe.get_mut(name).expect("present").as_mut_slice()[idx] = orig;

            let numeric = ((plus - minus) / (eps + eps)).as_f64();
            let a = grad.as_slice()[idx].as_f64();
            let denom = a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            let rel = (a - numeric).abs() / denom;
            report.entries_checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel;
                report.worst = Some((name.clone(), idx));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
