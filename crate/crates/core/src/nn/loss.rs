use super::{NnError, Tensor};

/// Mean softmax cross-entropy over the batch of `logits` (`batch × classes × 1 × 1`)
/// and its gradient with respect to the logits.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor), NnError> {
    let [n, k, h, w] = logits.shape();
    if h != 1 || w != 1 {
        return Err(NnError::InvalidTensor(format!(
            "logits must be batch x classes x 1 x 1, got {:?}",
            logits.shape()
        )));
    }
    if labels.len() != n {
        return Err(NnError::InvalidTensor(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(NnError::LabelOutOfRange {
            index,
            label,
            n_classes: k,
        });
    }
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = 0.0;
    let z = logits.data();
    let g = grad.data_mut();
    for b in 0..n {
        let row = &z[b * k..(b + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = max + sum.ln();
        loss += log_sum - row[labels[b]];
        for j in 0..k {
            let p = (row[j] - log_sum).exp();
            let onehot = if j == labels[b] { 1.0 } else { 0.0 };
            g[b * k + j] = (p - onehot) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let t = Tensor::from_vec([2, 3, 1, 1], vec![0.0; 6]).unwrap();
        let (l, g) = softmax_xent(&t, &[0, 2]).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-12);
        assert!((g.data()[0] - (1.0 / 3.0 - 1.0) / 2.0).abs() < 1e-12);
        assert!((g.data().iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn stable_for_large_logits() {
        let t = Tensor::from_vec([1, 2, 1, 1], vec![1000.0, 0.0]).unwrap();
        let (l, _) = softmax_xent(&t, &[1]).unwrap();
        assert!((l - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_labels() {
        let t = Tensor::from_vec([1, 3, 1, 1], vec![0.0; 3]).unwrap();
        assert!(matches!(
            softmax_xent(&t, &[3]),
            Err(NnError::LabelOutOfRange { label: 3, .. })
        ));
    }
}
