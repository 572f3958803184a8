//! Tensor-level multirate primitives and their exact adjoints.
//!
//! All primitives act along one axis of an arbitrary tensor. Boundaries use
//! half-sample symmetric extension; the adjoints accumulate contributions
//! of extended samples back onto the samples they were copied from.

use super::stencil::Stencil;
use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

fn split_axis<T: Real>(x: &Tensor<T>, axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= x.ndim() {
        return Err(Error::dim(format!(
            "axis {axis} out of range for a {}-d tensor",
            x.ndim()
        )));
    }
    let outer = x.shape()[..axis].iter().product();
    let inner = x.shape()[axis + 1..].iter().product();
    Ok((outer, x.shape()[axis], inner))
}

fn run<T: Real>(
    x: &Tensor<T>,
    axis: usize,
    stencil: &Stencil<T>,
    transpose: bool,
) -> Result<Tensor<T>> {
    let (outer, n, inner) = split_axis(x, axis)?;
    let (expect, out_n) = if transpose {
        (stencil.out_len(), stencil.in_len())
    } else {
        (stencil.in_len(), stencil.out_len())
    };
    if n != expect {
        return Err(Error::dim(format!(
            "extent {n} along axis {axis} does not match the stage ({expect} expected)"
        )));
    }
    let data = if transpose {
        stencil.apply_transpose(x.data(), outer, inner)
    } else {
        stencil.apply(x.data(), outer, inner)
    };
    let mut shape = x.shape().to_vec();
    shape[axis] = out_n;
    Tensor::new(&shape, data)
}

fn check_phase(tree_offset: usize) -> Result<()> {
    if tree_offset > 1 {
        return Err(Error::dim(format!(
            "tree offset must be 0 or 1, got {tree_offset}"
        )));
    }
    Ok(())
}

fn even_extent<T: Real>(x: &Tensor<T>, axis: usize) -> Result<usize> {
    let (_, n, _) = split_axis(x, axis)?;
    if n % 2 != 0 {
        return Err(Error::dim(format!("extent {n} along axis {axis} is odd")));
    }
    Ok(n)
}

/// Non-decimating filter along `axis` (output length `n` for odd filters).
pub fn filter<T: Real>(x: &Tensor<T>, h: &[f64], axis: usize) -> Result<Tensor<T>> {
    let (_, n, _) = split_axis(x, axis)?;
    run(x, axis, &Stencil::filter(n, h), false)
}

/// Symmetric extension, full convolution, then the samples at
/// `2k + tree_offset`. Halves the extent along `axis`.
///
/// ```
/// use wavegain::{transform::multirate::filter_decimate, Tensor};
/// let x = Tensor::new(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
/// let y = filter_decimate(&x, &[1.0], 0, 0).unwrap();
/// assert_eq!(y.data(), &[1.0, 3.0]);
/// ```
pub fn filter_decimate<T: Real>(
    x: &Tensor<T>,
    h: &[f64],
    axis: usize,
    tree_offset: usize,
) -> Result<Tensor<T>> {
    check_phase(tree_offset)?;
    let n = even_extent(x, axis)?;
    run(x, axis, &Stencil::filter_decimate(n, h, tree_offset), false)
}

pub fn filter_decimate_adjoint<T: Real>(
    g: &Tensor<T>,
    h: &[f64],
    axis: usize,
    tree_offset: usize,
) -> Result<Tensor<T>> {
    check_phase(tree_offset)?;
    let (_, half, _) = split_axis(g, axis)?;
    run(
        g,
        axis,
        &Stencil::filter_decimate(2 * half, h, tree_offset),
        true,
    )
}

/// Places the input on the `tree_offset` phase of a zero-interleaved
/// signal of twice the length, then filters it. Dual of [`filter_decimate`].
///
/// ```
/// use wavegain::{transform::multirate::upsample_filter, Tensor};
/// let x = Tensor::new(&[2], vec![5.0, 7.0]).unwrap();
/// assert_eq!(upsample_filter(&x, &[1.0], 0, 0).unwrap().data(), &[5.0, 0.0, 7.0, 0.0]);
/// assert_eq!(upsample_filter(&x, &[1.0], 0, 1).unwrap().data(), &[0.0, 5.0, 0.0, 7.0]);
/// ```
pub fn upsample_filter<T: Real>(
    x: &Tensor<T>,
    h: &[f64],
    axis: usize,
    tree_offset: usize,
) -> Result<Tensor<T>> {
    check_phase(tree_offset)?;
    let (_, n, _) = split_axis(x, axis)?;
    run(x, axis, &Stencil::upsample_filter(n, h, tree_offset), false)
}

pub fn upsample_filter_adjoint<T: Real>(
    g: &Tensor<T>,
    h: &[f64],
    axis: usize,
    tree_offset: usize,
) -> Result<Tensor<T>> {
    check_phase(tree_offset)?;
    let n = even_extent(g, axis)?;
    run(
        g,
        axis,
        &Stencil::upsample_filter(n / 2, h, tree_offset),
        true,
    )
}

/// Decimating q-shift stage on an interleaved two-tree signal; `ha` and
/// `hb` are the per-tree filters. The extent must be a multiple of four.
pub fn qshift_decimate<T: Real>(
    x: &Tensor<T>,
    ha: &[f64],
    hb: &[f64],
    axis: usize,
) -> Result<Tensor<T>> {
    let (_, n, _) = split_axis(x, axis)?;
    if n % 4 != 0 {
        return Err(Error::dim(format!(
            "q-shift stage needs a multiple of 4 samples, got {n}"
        )));
    }
    run(x, axis, &Stencil::qshift_decimate(n, ha, hb), false)
}

pub fn qshift_decimate_adjoint<T: Real>(
    g: &Tensor<T>,
    ha: &[f64],
    hb: &[f64],
    axis: usize,
) -> Result<Tensor<T>> {
    let n = even_extent(g, axis)?;
    run(g, axis, &Stencil::qshift_decimate(2 * n, ha, hb), true)
}

/// Interpolating q-shift stage, doubling the extent along `axis`.
pub fn qshift_interpolate<T: Real>(
    x: &Tensor<T>,
    ha: &[f64],
    hb: &[f64],
    axis: usize,
) -> Result<Tensor<T>> {
    let n = even_extent(x, axis)?;
    run(x, axis, &Stencil::qshift_interpolate(n, ha, hb), false)
}

pub fn qshift_interpolate_adjoint<T: Real>(
    g: &Tensor<T>,
    ha: &[f64],
    hb: &[f64],
    axis: usize,
) -> Result<Tensor<T>> {
    let (_, n, _) = split_axis(g, axis)?;
    if n % 4 != 0 {
        return Err(Error::dim(format!(
            "q-shift adjoint needs a multiple of 4 samples, got {n}"
        )));
    }
    run(g, axis, &Stencil::qshift_interpolate(n / 2, ha, hb), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::tensor::inner_product;
    use crate::transform::FilterSet;

    /// Independent oracle: explicit extension, full convolution, slicing.
    fn naive_filter_decimate(x: &[f64], h: &[f64], phase: usize) -> Vec<f64> {
        let n = x.len() as isize;
        let m = h.len();
        let m2 = (m / 2) as isize;
        let ext: Vec<f64> = (-m2..n + m2)
            .map(|i| {
                let mut j = i;
                while j < 0 || j >= n {
                    j = if j < 0 { -j - 1 } else { 2 * n - 1 - j };
                }
                x[j as usize]
            })
            .collect();
        let full_len = ext.len() + m - 1;
        let mut full = vec![0.0; full_len];
        for (i, &e) in ext.iter().enumerate() {
            for (k, &hk) in h.iter().enumerate() {
                full[i + k] += e * hk;
            }
        }
        let valid: Vec<f64> = full[m - 1..ext.len()].to_vec();
        valid
            .into_iter()
            .skip(phase)
            .step_by(2)
            .take(x.len() / 2)
            .collect()
    }

    fn dense<F: Fn(&Tensor<f64>) -> Tensor<f64>>(f: F, n_in: usize) -> Vec<Vec<f64>> {
        (0..n_in)
            .map(|k| {
                let mut e = Tensor::zeros(&[n_in]);
                e.data_mut()[k] = 1.0;
                f(&e).into_data()
            })
            .collect()
    }

    #[test]
    fn delta_filter_selects_phase() {
        let x = Tensor::new(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(
            filter_decimate(&x, &[1.0], 0, 0).unwrap().data(),
            &[1.0, 3.0]
        );
        assert_eq!(
            filter_decimate(&x, &[1.0], 0, 1).unwrap().data(),
            &[2.0, 4.0]
        );
        let g = Tensor::new(&[2], vec![5.0, 7.0]).unwrap();
        assert_eq!(
            filter_decimate_adjoint(&g, &[1.0], 0, 0).unwrap().data(),
            &[5.0, 0.0, 7.0, 0.0]
        );
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = SeededRng::new(11);
        for m in [1, 5, 7, 10] {
            let h: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
            let x: Tensor<f64> = rng.normal_tensor(&[32]);
            for phase in 0..2 {
                let got = filter_decimate(&x, &h, 0, phase).unwrap();
                let want = naive_filter_decimate(x.data(), &h, phase);
                for (a, b) in got.data().iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-13, "m={m} phase={phase}");
                }
            }
        }
    }

    #[test]
    fn dc_gain() {
        let x = Tensor::full(&[16], 3.0);
        let h = FilterSet::default().qshift.h0a;
        let y = filter_decimate(&x, &h, 0, 0).unwrap();
        for v in y.data() {
            assert!((v - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_extent_is_rejected() {
        let x = Tensor::<f64>::zeros(&[5]);
        assert!(matches!(
            filter_decimate(&x, &[1.0], 0, 0),
            Err(Error::Dimension(_))
        ));
        let x = Tensor::<f64>::zeros(&[6]);
        assert!(qshift_decimate(&x, &[1.0, 0.0], &[0.0, 1.0], 0).is_err());
        assert!(filter_decimate(&x, &[1.0], 2, 0).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let z = Tensor::<f64>::zeros(&[8]);
        let fs = FilterSet::default();
        assert_eq!(
            upsample_filter(&z, &fs.level1.g0o, 0, 1).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn level1_stage_reconstructs() {
        let fs = FilterSet::default();
        let mut rng = SeededRng::new(2);
        let x: Tensor<f64> = rng.normal_tensor(&[64]);
        let mut y = Tensor::zeros(&[64]);
        for (h, g) in [
            (&fs.level1.h0o, &fs.level1.g0o),
            (&fs.level1.h1o, &fs.level1.g1o),
        ] {
            for p in 0..2 {
                let t = filter_decimate(&x, h, 0, p).unwrap();
                y.add_assign(&upsample_filter(&t, g, 0, p).unwrap())
                    .unwrap();
            }
        }
        assert!(y.max_abs_diff(&x).unwrap() <= 1e-10);
    }

    #[test]
    fn qshift_stage_reconstructs() {
        let q = FilterSet::default().qshift;
        let mut rng = SeededRng::new(3);
        let x: Tensor<f64> = rng.normal_tensor(&[64]);
        let lo = qshift_decimate(&x, &q.h0b, &q.h0a, 0).unwrap();
        let hi = qshift_decimate(&x, &q.h1b, &q.h1a, 0).unwrap();
        let mut y = qshift_interpolate(&lo, &q.g0b, &q.g0a, 0).unwrap();
        y.add_assign(&qshift_interpolate(&hi, &q.g1b, &q.g1a, 0).unwrap())
            .unwrap();
        assert!(y.max_abs_diff(&x).unwrap() <= 1e-10);
    }

    #[test]
    fn adjoint_dot_tests() {
        let fs = FilterSet::default();
        let q = &fs.qshift;
        let mut rng = SeededRng::new(4);
        for trial in 0..100 {
            let h = if trial % 2 == 0 {
                &fs.level1.h1o
            } else {
                &q.h0a
            };
            let p = trial % 2;
            let x: Tensor<f64> = rng.normal_tensor(&[3, 16, 5]);
            let y: Tensor<f64> = rng.normal_tensor(&[3, 8, 5]);
            let lhs = inner_product(&filter_decimate(&x, h, 1, p).unwrap(), &y).unwrap();
            let rhs = inner_product(&x, &filter_decimate_adjoint(&y, h, 1, p).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * x.norm() * y.norm());

            let lhs = inner_product(&upsample_filter(&y, h, 1, p).unwrap(), &x).unwrap();
            let rhs = inner_product(&y, &upsample_filter_adjoint(&x, h, 1, p).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * x.norm() * y.norm());

            let lhs = inner_product(&qshift_decimate(&x, &q.h1b, &q.h1a, 1).unwrap(), &y).unwrap();
            let rhs = inner_product(&x, &qshift_decimate_adjoint(&y, &q.h1b, &q.h1a, 1).unwrap())
                .unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * x.norm() * y.norm());

            let lhs =
                inner_product(&qshift_interpolate(&y, &q.g0b, &q.g0a, 1).unwrap(), &x).unwrap();
            let rhs = inner_product(
                &y,
                &qshift_interpolate_adjoint(&x, &q.g0b, &q.g0a, 1).unwrap(),
            )
            .unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * x.norm() * y.norm());
        }
    }

    #[test]
    fn adjoints_match_dense_transpose() {
        let fs = FilterSet::default();
        let n = 16;
        for (h, p) in [
            (&fs.level1.h0o, 0),
            (&fs.level1.h1o, 1),
            (&fs.qshift.h0a, 1),
        ] {
            let fwd = dense(|e| filter_decimate(e, h, 0, p).unwrap(), n);
            let adj = dense(|e| filter_decimate_adjoint(e, h, 0, p).unwrap(), n / 2);
            for i in 0..n {
                for k in 0..n / 2 {
                    assert!((fwd[i][k] - adj[k][i]).abs() <= 1e-13);
                }
            }
            let fwd = dense(|e| upsample_filter(e, h, 0, p).unwrap(), n / 2);
            let adj = dense(|e| upsample_filter_adjoint(e, h, 0, p).unwrap(), n);
            for i in 0..n / 2 {
                for k in 0..n {
                    assert!((fwd[i][k] - adj[k][i]).abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn qshift_synthesis_adjoint_is_analysis() {
        // time-reversed synthesis filters make the synthesis stage the
        // transpose of the analysis stage with the trees swapped
        let q = FilterSet::default().qshift;
        let n = 16;
        for (ha, hb, ga, gb) in [
            (&q.h0b, &q.h0a, &q.g0b, &q.g0a),
            (&q.h1b, &q.h1a, &q.g1b, &q.g1a),
        ] {
            let analysis = dense(|e| qshift_decimate(e, ha, hb, 0).unwrap(), n);
            let synthesis = dense(|e| qshift_interpolate(e, ga, gb, 0).unwrap(), n / 2);
            for i in 0..n {
                for k in 0..n / 2 {
                    assert!((analysis[i][k] - synthesis[k][i]).abs() <= 1e-15);
                }
            }
        }
    }
}
