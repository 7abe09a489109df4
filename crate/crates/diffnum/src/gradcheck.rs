//! Central finite-difference verification of tape pullbacks.

use crate::tape::Tape;
use crate::tensor::{DiffTensor, Scalar};

/// Max relative error between the analytic gradient of a scalar-valued
/// function and central finite differences, over every component of every
/// input: |analytic - numeric| / max(1, |numeric|).
///
/// `f` must be a pure function of the tracked inputs it receives.
pub fn grad_check<T, F>(f: F, inputs: &[DiffTensor<T>], step: T) -> T
where
    T: Scalar,
    F: Fn(&Tape<T>, &[DiffTensor<T>]) -> DiffTensor<T>,
{
    // Analytic pass.
    let tape = Tape::new();
    let tracked: Vec<DiffTensor<T>> = inputs.iter().map(|t| tape.param(t)).collect();
    let loss = f(&tape, &tracked);
    assert_eq!(loss.len(), 1, "grad_check needs a scalar-valued function");
    let grads = tape.backward(&loss).expect("backward");

    let eval = |pts: &[DiffTensor<T>]| -> T {
        let t = Tape::inference();
        let ins: Vec<DiffTensor<T>> = pts.to_vec();
        f(&t, &ins).item()
    };

    let mut max_err = T::zero();
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(&tracked[k]);
        for j in 0..input.len() {
            let mut plus = inputs.to_vec();
            let mut minus = inputs.to_vec();
            let mut pv = plus[k].values().to_vec();
            let mut mv = minus[k].values().to_vec();
            pv[j] = pv[j] + step;
            mv[j] = mv[j] - step;
            plus[k] = DiffTensor::new(input.shape().to_vec(), pv);
            minus[k] = DiffTensor::new(input.shape().to_vec(), mv);
            let numeric = (eval(&plus) - eval(&minus)) / (T::lit(2.0) * step);
            let err = (analytic[j] - numeric).abs() / T::one().max(numeric.abs());
            if err > max_err {
                max_err = err;
            }
        }
    }
    max_err
}

/// Reduce a tensor-valued function to a scalar through a fixed random
/// cotangent, then grad-check it. Returns the max relative error.
pub fn grad_check_vec<T, F>(
    f: F,
    inputs: &[DiffTensor<T>],
    cotangent: &DiffTensor<T>,
    step: T,
) -> T
where
    T: Scalar,
    F: Fn(&Tape<T>, &[DiffTensor<T>]) -> DiffTensor<T>,
{
    let co = cotangent.detach();
    grad_check(
        move |tape, ins| {
            let out = f(tape, ins);
            let flat = tape.reshape(&out, vec![out.len()]);
            let co = co.reshaped(vec![co.len()]);
            tape.dot(&flat, &co)
        },
        inputs,
        step,
    )
}
