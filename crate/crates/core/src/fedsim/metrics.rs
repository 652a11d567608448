use crate::error::{Error, Result};
use crate::vector::{distance, mean, GradientVector};

/// `‖ĝ − ḡ‖` with `ḡ` the mean of the honest gradients.
pub fn deviation_metric(aggregate: &GradientVector, honest: &[GradientVector]) -> Result<f64> {
    let honest_mean = mean(honest)?;
    if honest_mean.dim() != aggregate.dim() {
        return Err(Error::DimensionMismatch {
            expected: honest_mean.dim(),
            found: aggregate.dim(),
        });
    }
    Ok(distance(aggregate, &honest_mean))
}

/// Returns `(honest_ratio, byz_count)`: the share of participating honest
/// clients that made it into `selected`, and how many Byzantine ones did.
///
/// `selected = None` means the rule used every participant.
pub fn inclusion_metrics(selected: Option<&[usize]>, is_byzantine: &[bool]) -> (f64, usize) {
    let honest_total = is_byzantine.iter().filter(|&&b| !b).count();
    let (honest_in, byz_in) = match selected {
        None => (honest_total, is_byzantine.len() - honest_total),
        Some(sel) => sel.iter().fold((0, 0), |(h, b), &i| {
            if is_byzantine[i] {
                (h, b + 1)
            } else {
                (h + 1, b)
            }
        }),
    };
    let ratio = if honest_total == 0 {
        0.0
    } else {
        honest_in as f64 / honest_total as f64
    };
    (ratio, byz_in)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_examples() {
        let honest = vec![GradientVector::new(vec![1.0, 1.0, 1.0]), GradientVector::new(vec![3.0, -1.0, 1.0])];
        let mu = mean(&honest).unwrap();
        assert_eq!(deviation_metric(&mu, &honest).unwrap(), 0.0);
        let shifted = GradientVector::new(vec![mu[0] + 3.0, mu[1] + 4.0, mu[2]]);
        assert_eq!(deviation_metric(&shifted, &honest).unwrap(), 5.0);
        assert!(deviation_metric(&mu, &[]).is_err());
    }

    #[test]
    fn inclusion_examples() {
        let byz = [true, false, false, true, false];
        assert_eq!(inclusion_metrics(Some(&[1, 2, 4]), &byz), (1.0, 0));
        assert_eq!(inclusion_metrics(None, &byz), (1.0, 2));
        let (r, b) = inclusion_metrics(Some(&[0, 1]), &byz);
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(b, 1);
    }
}
