//! One-dimensional linear stages stored as fixed-width gather stencils.
//!
//! Output sample `k` of a stage is `Σ_t w[k,t] · x[idx[k,t]]`. Symmetric
//! boundary extension is folded into the index table, so a repeated index
//! means the extension reused that input sample. The transpose scatters
//! with the same table, which accumulates the fold-back at the boundaries
//! and makes every adjoint exact to rounding.

use crate::tensor::Real;

#[derive(Clone, Debug)]
pub struct Stencil<T> {
    in_len: usize,
    out_len: usize,
    taps: usize,
    idx: Vec<usize>,
    w: Vec<T>,
}

/// Half-sample symmetric reflection: `… x1 x0 | x0 x1 … xn-1 | xn-1 xn-2 …`.
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let t = i.rem_euclid(period);
    if t >= n as isize {
        (period - 1 - t) as usize
    } else {
        t as usize
    }
}

impl<T: Real> Stencil<T> {
    fn from_rows(in_len: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let taps = rows.iter().map(Vec::len).max().unwrap_or(0);
        let mut idx = Vec::with_capacity(rows.len() * taps);
        let mut w = Vec::with_capacity(rows.len() * taps);
        for row in &rows {
            for t in 0..taps {
                let (i, v) = row.get(t).copied().unwrap_or((0, 0.0));
                debug_assert!(i < in_len);
                idx.push(i);
                w.push(T::cst(v));
            }
        }
        Self {
            in_len,
            out_len: rows.len(),
            taps,
            idx,
            w,
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Number of multiplies per output sample.
    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Non-decimating filter with symmetric extension: odd-length filters
    /// give an output aligned with the input, even-length filters one extra
    /// sample aligned with input midpoints.
    pub fn filter(n: usize, h: &[f64]) -> Self {
        let m = h.len();
        let m2 = m / 2;
        let ext: Vec<usize> = (0..n + 2 * m2)
            .map(|j| reflect(j as isize - m2 as isize, n))
            .collect();
        Self::from_rows(n, valid_conv(&ext, h))
    }

    /// [`Stencil::filter`] keeping every second output from `phase`.
    pub fn filter_decimate(n: usize, h: &[f64], phase: usize) -> Self {
        let full = Self::filter(n, h).rows();
        let rows = full
            .into_iter()
            .skip(phase)
            .step_by(2)
            .take(n / 2)
            .collect();
        Self::from_rows(n, rows)
    }

    /// Zero-interleave to `2n` samples with the data on `phase`, then
    /// [`Stencil::filter`], keeping the first `2n` outputs.
    pub fn upsample_filter(n: usize, h: &[f64], phase: usize) -> Self {
        let full = Self::filter(2 * n, h).rows();
        let rows = full
            .into_iter()
            .take(2 * n)
            .map(|row| {
                row.into_iter()
                    .filter(|&(i, _)| i % 2 == phase)
                    .map(|(i, v)| (i / 2, v))
                    .collect()
            })
            .collect();
        Self::from_rows(n, rows)
    }

    /// Two-tree decimating q-shift stage on an interleaved signal.
    ///
    /// `ha` runs on one tree and `hb` on the other. Symmetric extension of
    /// the interleaved signal swaps the trees at each boundary.
    pub fn qshift_decimate(n: usize, ha: &[f64], hb: &[f64]) -> Self {
        assert!(
            n % 4 == 0,
            "q-shift decimation needs a multiple of 4 samples"
        );
        assert_eq!(ha.len(), hb.len());
        let m = ha.len();
        assert!(m % 2 == 0, "q-shift filters have even length");
        let ext = |j: isize| reflect(j - m as isize, n);
        let t: Vec<isize> = (5..(n + 2 * m - 2) as isize).step_by(4).collect();
        let (hao, hae) = split_phases(ha);
        let (hbo, hbe) = split_phases(hb);
        let gather = |shift: isize| t.iter().map(|&ti| ext(ti - shift)).collect::<Vec<_>>();
        let ya = add_rows(valid_conv(&gather(1), &hao), valid_conv(&gather(3), &hae));
        let yb = add_rows(valid_conv(&gather(0), &hbo), valid_conv(&gather(2), &hbe));
        let a_first = dot(ha, hb) > 0.0;
        let rows = interleave(ya, yb, a_first);
        debug_assert_eq!(rows.len(), n / 2);
        Self::from_rows(n, rows)
    }

    /// Two-tree interpolating q-shift stage, producing `2n` interleaved samples.
    pub fn qshift_interpolate(n: usize, ha: &[f64], hb: &[f64]) -> Self {
        assert!(
            n % 2 == 0,
            "q-shift interpolation needs an even number of samples"
        );
        assert_eq!(ha.len(), hb.len());
        let m = ha.len();
        assert!(m % 2 == 0, "q-shift filters have even length");
        let m2 = m / 2;
        let ext = |j: isize| reflect(j - m2 as isize, n);
        let (hao, hae) = split_phases(ha);
        let (hbo, hbe) = split_phases(hb);
        let a_first = dot(ha, hb) > 0.0;
        let (start, end) = if m2 % 2 == 0 {
            (3, n + m)
        } else {
            (2, n + m - 1)
        };
        let t: Vec<isize> = (start as isize..end as isize).step_by(2).collect();
        let (ta, tb): (Vec<isize>, Vec<isize>) = if a_first {
            (t.clone(), t.iter().map(|v| v - 1).collect())
        } else {
            (t.iter().map(|v| v - 1).collect(), t.clone())
        };
        let gather =
            |ts: &[isize], shift: isize| ts.iter().map(|&v| ext(v - shift)).collect::<Vec<_>>();
        let phases = if m2 % 2 == 0 {
            [
                valid_conv(&gather(&tb, 2), &hae),
                valid_conv(&gather(&ta, 2), &hbe),
                valid_conv(&gather(&tb, 0), &hao),
                valid_conv(&gather(&ta, 0), &hbo),
            ]
        } else {
            [
                valid_conv(&gather(&tb, 0), &hao),
                valid_conv(&gather(&ta, 0), &hbo),
                valid_conv(&gather(&tb, 0), &hae),
                valid_conv(&gather(&ta, 0), &hbe),
            ]
        };
        let quarter = n / 2;
        let mut rows = Vec::with_capacity(2 * n);
        for k in 0..quarter {
            for p in &phases {
                rows.push(p[k].clone());
            }
        }
        Self::from_rows(n, rows)
    }

    /// Extends `n` samples to `n_out ≥ n` by symmetric reflection.
    pub fn symmetric_pad(n: usize, n_out: usize) -> Self {
        let rows = (0..n_out)
            .map(|k| vec![(reflect(k as isize, n), 1.0)])
            .collect();
        Self::from_rows(n, rows)
    }

    /// Keeps the first `n_out` of `n` samples.
    pub fn crop(n: usize, n_out: usize) -> Self {
        assert!(n_out <= n);
        let rows = (0..n_out).map(|k| vec![(k, 1.0)]).collect();
        Self::from_rows(n, rows)
    }

    fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.out_len)
            .map(|k| {
                (0..self.taps)
                    .map(|t| {
                        (
                            self.idx[k * self.taps + t],
                            self.w[k * self.taps + t].as_f64(),
                        )
                    })
                    .filter(|&(_, v)| v != 0.0)
                    .collect()
            })
            .collect()
    }

    /// Dense `out_len × in_len` matrix, row-major.
    #[cfg(test)]
    pub fn to_dense(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.out_len * self.in_len];
        for k in 0..self.out_len {
            for t in 0..self.taps {
                let j = k * self.taps + t;
                m[k * self.in_len + self.idx[j]] += self.w[j].as_f64();
            }
        }
        m
    }

    /// Applies the stage along the middle axis of a `[outer, in_len, inner]`
    /// block, returning `[outer, out_len, inner]`.
    pub fn apply(&self, x: &[T], outer: usize, inner: usize) -> Vec<T> {
        debug_assert_eq!(x.len(), outer * self.in_len * inner);
        let mut y = vec![T::zero(); outer * self.out_len * inner];
        for o in 0..outer {
            let xo = &x[o * self.in_len * inner..(o + 1) * self.in_len * inner];
            let yo = &mut y[o * self.out_len * inner..(o + 1) * self.out_len * inner];
            if inner == 1 {
                for k in 0..self.out_len {
                    let base = k * self.taps;
                    let mut acc = T::zero();
                    for t in 0..self.taps {
                        acc += self.w[base + t] * xo[self.idx[base + t]];
                    }
                    yo[k] = acc;
                }
            } else {
                for k in 0..self.out_len {
                    let dst = &mut yo[k * inner..(k + 1) * inner];
                    for t in 0..self.taps {
                        let w = self.w[k * self.taps + t];
                        let i = self.idx[k * self.taps + t];
                        let src = &xo[i * inner..(i + 1) * inner];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += w * s;
                        }
                    }
                }
            }
        }
        y
    }

    /// Exact transpose of [`Stencil::apply`]: `[outer, out_len, inner]` to
    /// `[outer, in_len, inner]`.
    pub fn apply_transpose(&self, g: &[T], outer: usize, inner: usize) -> Vec<T> {
        debug_assert_eq!(g.len(), outer * self.out_len * inner);
        let mut x = vec![T::zero(); outer * self.in_len * inner];
        for o in 0..outer {
            let go = &g[o * self.out_len * inner..(o + 1) * self.out_len * inner];
            let xo = &mut x[o * self.in_len * inner..(o + 1) * self.in_len * inner];
            for k in 0..self.out_len {
                let src = &go[k * inner..(k + 1) * inner];
                for t in 0..self.taps {
                    let w = self.w[k * self.taps + t];
                    let i = self.idx[k * self.taps + t];
                    let dst = &mut xo[i * inner..(i + 1) * inner];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        x
    }
}

/// `out[k] = Σ_i h[i] · x[seq[k + m - 1 - i]]` for every fully covered `k`.
fn valid_conv(seq: &[usize], h: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let m = h.len();
    assert!(seq.len() >= m, "signal too short for the filter");
    (0..seq.len() - m + 1)
        .map(|k| (0..m).map(|i| (seq[k + m - 1 - i], h[i])).collect())
        .collect()
}

fn split_phases(h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        h.iter().step_by(2).copied().collect(),
        h.iter().skip(1).step_by(2).copied().collect(),
    )
}

fn add_rows(a: Vec<Vec<(usize, f64)>>, b: Vec<Vec<(usize, f64)>>) -> Vec<Vec<(usize, f64)>> {
    a.into_iter()
        .zip(b)
        .map(|(mut ra, rb)| {
            ra.extend(rb);
            ra
        })
        .collect()
}

fn interleave<R>(a: Vec<R>, b: Vec<R>, a_first: bool) -> Vec<R> {
    let (first, second) = if a_first { (a, b) } else { (b, a) };
    first
        .into_iter()
        .zip(second)
        .flat_map(|(x, y)| [x, y])
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_repeats_end_samples() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        // shorter than the extension
        assert_eq!(reflect(-5, 2), 0);
        assert_eq!(reflect(5, 2), 1);
    }

    #[test]
    fn transpose_matches_dense() {
        let h = [0.1, -0.4, 0.9, 0.3, -0.2, 0.05];
        for s in [
            Stencil::<f64>::filter(12, &h),
            Stencil::filter_decimate(12, &h, 1),
            Stencil::upsample_filter(6, &h, 0),
            Stencil::qshift_decimate(12, &h, &[0.3, 0.2, -0.1, 0.7, 0.4, 0.0]),
            Stencil::qshift_interpolate(6, &h, &[0.3, 0.2, -0.1, 0.7, 0.4, 0.0]),
            Stencil::symmetric_pad(5, 8),
        ] {
            let d = s.to_dense();
            for k in 0..s.out_len() {
                let mut e = vec![0.0; s.out_len()];
                e[k] = 1.0;
                let col = s.apply_transpose(&e, 1, 1);
                for i in 0..s.in_len() {
                    assert_eq!(col[i], d[k * s.in_len() + i]);
                }
            }
        }
    }

    #[test]
    fn inner_axis_matches_contiguous_axis() {
        let h = [0.25, 0.5, 0.25];
        let s = Stencil::<f64>::filter_decimate(8, &h, 0);
        // [1, 8, 3] block vs. three separate signals
        let x: Vec<f64> = (0..24).map(|v| (v as f64 * 0.7).sin()).collect();
        let y = s.apply(&x, 1, 3);
        for c in 0..3 {
            let col: Vec<f64> = (0..8).map(|r| x[r * 3 + c]).collect();
            let yc = s.apply(&col, 1, 1);
            for r in 0..4 {
                assert!((y[r * 3 + c] - yc[r]).abs() < 1e-15);
            }
        }
    }
}
