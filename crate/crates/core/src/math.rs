//! Float helpers that work without `std`.

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `ln(num / den)` with the conventions used by every ratio supremum in this
/// crate: `0/0` is reported as `None` (skipped), `c/0` with `c > 0` is `+∞`.
pub fn log_ratio(num: f64, den: f64) -> Option<f64> {
    if den == 0.0 {
        if num == 0.0 {
            None
        } else {
            Some(f64::INFINITY)
        }
    } else {
        Some(ln(num / den))
    }
}

/// Row sums within `tol` of one and non-negative entries.
pub(crate) fn check_row(row: &[f64], tol: f64) -> Result<(), RowFault> {
    let mut sum = 0.0;
    for (i, &p) in row.iter().enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(RowFault::Entry(i, p));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(RowFault::Sum(sum));
    }
    Ok(())
}

pub(crate) enum RowFault {
    Entry(usize, f64),
    Sum(f64),
}

/// Index of the category selected by a uniform draw `s ∈ [0,1)`.
pub(crate) fn pick(probs: &[f64], s: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if s < acc {
            return i;
        }
    }
    last
}
