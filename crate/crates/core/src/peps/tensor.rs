//! Dense real tensor plumbing on top of `ndarray`, with the matrix
//! factorizations delegated to `nalgebra`.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayD, Axis, IxDyn};

/// Contracts `a` and `b` over the paired axes. Result axes are the free
/// axes of `a` (in order) followed by the free axes of `b`.
pub(crate) fn tensordot(
    a: &ArrayD<f64>,
    axes_a: &[usize],
    b: &ArrayD<f64>,
    axes_b: &[usize],
) -> ArrayD<f64> {
    debug_assert_eq!(axes_a.len(), axes_b.len());
    let free_a: Vec<usize> = (0..a.ndim()).filter(|i| !axes_a.contains(i)).collect();
    let free_b: Vec<usize> = (0..b.ndim()).filter(|i| !axes_b.contains(i)).collect();
    for (&x, &y) in axes_a.iter().zip(axes_b) {
        debug_assert_eq!(a.shape()[x], b.shape()[y]);
    }
    let (ma, shape_a, _) = matricize(a, &free_a, axes_a);
    let (mb, _, shape_b) = matricize(b, axes_b, &free_b);
    let prod = ma.dot(&mb);
    let mut shape = shape_a;
    shape.extend(shape_b);
    prod.into_shape_with_order(IxDyn(&shape))
        .expect("contiguous product")
}

/// Reshapes `a` into a matrix with `rows` axes grouped as row index and
/// `cols` axes as column index. Also returns the grouped shapes.
pub(crate) fn matricize(
    a: &ArrayD<f64>,
    rows: &[usize],
    cols: &[usize],
) -> (Array2<f64>, Vec<usize>, Vec<usize>) {
    let mut perm = rows.to_vec();
    perm.extend_from_slice(cols);
    let row_shape: Vec<usize> = rows.iter().map(|&i| a.shape()[i]).collect();
    let col_shape: Vec<usize> = cols.iter().map(|&i| a.shape()[i]).collect();
    let r: usize = row_shape.iter().product();
    let c: usize = col_shape.iter().product();
    let p = a.view().permuted_axes(IxDyn(&perm));
    let m = p
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((r, c))
        .expect("standard layout");
    (m, row_shape, col_shape)
}

pub(crate) fn permute(a: ArrayD<f64>, perm: &[usize]) -> ArrayD<f64> {
    a.permuted_axes(IxDyn(perm)).as_standard_layout().into_owned()
}

pub(crate) fn reshape(a: ArrayD<f64>, shape: &[usize]) -> ArrayD<f64> {
    let a = a.as_standard_layout().into_owned();
    a.into_shape_with_order(IxDyn(shape)).expect("size-preserving reshape")
}


/// Multiplies slice `k` along `axis` by `weights[k]`.
pub(crate) fn scale_axis(a: &mut ArrayD<f64>, axis: usize, weights: &[f64]) {
    debug_assert_eq!(a.shape()[axis], weights.len());
    for (k, mut lane) in a.axis_iter_mut(Axis(axis)).enumerate() {
        lane *= weights[k];
    }
}

fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[(i, j)])
}

fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin QR: `m = q r` with `q` of shape `(rows, k)`, `k = min(rows, cols)`.
pub(crate) fn qr(m: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let qr = to_na(m).qr();
    (from_na(&qr.q()), from_na(&qr.r()))
}

/// Thin SVD with singular values sorted in descending order.
pub(crate) struct Svd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub vt: Array2<f64>,
}

pub(crate) fn svd(m: &Array2<f64>) -> Svd {
    let dec = to_na(m).svd(true, true);
    let u = dec.u.expect("u requested");
    let vt = dec.v_t.expect("v_t requested");
    let s: Vec<f64> = dec.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let k = s.len();
    let (rows, cols) = m.dim();
    let mut uu = Array2::zeros((rows, k));
    let mut vv = Array2::zeros((k, cols));
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        ss.push(s[src]);
        for i in 0..rows {
            uu[(i, dst)] = u[(i, src)];
        }
        for j in 0..cols {
            vv[(dst, j)] = vt[(src, j)];
        }
    }
    Svd {
        u: uu,
        s: ss,
        vt: vv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    fn arange(shape: &[usize]) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        ArrayD::from_shape_vec(IxDyn(shape), (0..n).map(|x| (x as f64 * 0.7).sin()).collect())
            .unwrap()
    }

    #[test]
    fn tensordot_matches_loops() {
        let a = arange(&[2, 3, 4]);
        let b = arange(&[4, 5, 3]);
        let c = tensordot(&a, &[1, 2], &b, &[2, 0]);
        assert_eq!(c.shape(), &[2, 5]);
        for i in 0..2 {
            for j in 0..5 {
                let mut acc = 0.0;
                for x in 0..3 {
                    for y in 0..4 {
                        acc += a[[i, x, y]] * b[[y, j, x]];
                    }
                }
                assert!((acc - c[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factorizations_reconstruct() {
        let m = arange(&[6, 4]).into_shape_with_order((6, 4)).unwrap();
        let (q, r) = qr(&m);
        assert!((q.dot(&r) - &m).iter().all(|x| x.abs() < 1e-12));
        let d = svd(&m);
        assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        let mut us = d.u.clone();
        for (k, mut col) in us.columns_mut().into_iter().enumerate() {
            col *= d.s[k];
        }
        assert!((us.dot(&d.vt) - &m).iter().all(|x| x.abs() < 1e-12));
    }
}
