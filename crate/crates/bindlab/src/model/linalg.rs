//! Small dense kernels over row-major f64 buffers. Loop orders are chosen so
//! the inner loop runs over contiguous memory.

/// out[n x p] = x[n x k] . w[k x p]
pub fn matmul(x: &[f64], n: usize, k: usize, w: &[f64], p: usize, out: &mut [f64]) {
    debug_assert_eq!(x.len(), n * k);
    debug_assert_eq!(w.len(), k * p);
    debug_assert_eq!(out.len(), n * p);
    out.fill(0.0);
    for i in 0..n {
        let xi = &x[i * k..(i + 1) * k];
        let oi = &mut out[i * p..(i + 1) * p];
        for (kk, &a) in xi.iter().enumerate() {
            let wrow = &w[kk * p..(kk + 1) * p];
            for j in 0..p {
                oi[j] += a * wrow[j];
            }
        }
    }
}

/// out[k x p] += x[n x k]^T . d[n x p] (gradient of a weight matrix)
pub fn matmul_acc_at_b(x: &[f64], n: usize, k: usize, d: &[f64], p: usize, out: &mut [f64]) {
    debug_assert_eq!(x.len(), n * k);
    debug_assert_eq!(d.len(), n * p);
    debug_assert_eq!(out.len(), k * p);
    for i in 0..n {
        let xi = &x[i * k..(i + 1) * k];
        let di = &d[i * p..(i + 1) * p];
        for (kk, &a) in xi.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let orow = &mut out[kk * p..(kk + 1) * p];
            for j in 0..p {
                orow[j] += a * di[j];
            }
        }
    }
}

/// out[n x k] = d[n x p] . w[k x p]^T (gradient through a matmul input)
pub fn matmul_a_bt(d: &[f64], n: usize, p: usize, w: &[f64], k: usize, out: &mut [f64]) {
    debug_assert_eq!(d.len(), n * p);
    debug_assert_eq!(w.len(), k * p);
    debug_assert_eq!(out.len(), n * k);
    for i in 0..n {
        let di = &d[i * p..(i + 1) * p];
        let oi = &mut out[i * k..(i + 1) * k];
        for kk in 0..k {
            let wrow = &w[kk * p..(kk + 1) * p];
            let mut acc = 0.0;
            for j in 0..p {
                acc += di[j] * wrow[j];
            }
            oi[kk] = acc;
        }
    }
}

pub fn add_bias(out: &mut [f64], bias: &[f64], n: usize, p: usize) {
    debug_assert_eq!(out.len(), n * p);
    debug_assert_eq!(bias.len(), p);
    for i in 0..n {
        let oi = &mut out[i * p..(i + 1) * p];
        for j in 0..p {
            oi[j] += bias[j];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small_case() {
        // [1 2; 3 4] . [5 6; 7 8] = [19 22; 43 50]
        let x = [1.0, 2.0, 3.0, 4.0];
        let w = [5.0, 6.0, 7.0, 8.0];
        let mut out = [0.0; 4];
        matmul(&x, 2, 2, &w, 2, &mut out);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_products_agree_with_direct() {
        let x = [1.0, -2.0, 0.5, 3.0, 4.0, -1.0]; // 2x3
        let d = [2.0, 1.0, 0.0, -1.0]; // 2x2
        let mut grad = vec![0.0; 6]; // 3x2
        matmul_acc_at_b(&x, 2, 3, &d, 2, &mut grad);
        for kk in 0..3 {
            for j in 0..2 {
                let expect: f64 = (0..2).map(|i| x[i * 3 + kk] * d[i * 2 + j]).sum();
                assert!((grad[kk * 2 + j] - expect).abs() < 1e-12);
            }
        }
        let w = [1.0, 0.0, -1.0, 2.0, 0.5, 1.5]; // 3x2
        let mut back = vec![0.0; 6]; // 2x3
        matmul_a_bt(&d, 2, 2, &w, 3, &mut back);
        for i in 0..2 {
            for kk in 0..3 {
                let expect: f64 = (0..2).map(|j| d[i * 2 + j] * w[kk * 2 + j]).sum();
                assert!((back[i * 3 + kk] - expect).abs() < 1e-12);
            }
        }
    }
}
