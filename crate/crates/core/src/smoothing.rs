//! Separable Gaussian smoothing of grid data with mirror reflection at the edges.

/// Reflects an out-of-range index back into `0..n` (mirror about the end nodes).
#[inline]
fn reflect(mut k: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    k = k.rem_euclid(period);
    if k >= n {
        k = period - k;
    }
    k as usize
}

fn kernel(sigma_nodes: f64) -> Vec<f64> {
    if sigma_nodes <= 0.0 {
        return vec![1.0];
    }
    let r = (4.0 * sigma_nodes).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|m| (-(m as f64).powi(2) / (2.0 * sigma_nodes * sigma_nodes)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Smooths row-major `n1 x n2` data with standard deviations given in node units.
pub fn gaussian_smooth(values: &[f64], n1: usize, n2: usize, sigma1: f64, sigma2: f64) -> Vec<f64> {
    assert_eq!(values.len(), n1 * n2);
    let k1 = kernel(sigma1);
    let k2 = kernel(sigma2);
    let r1 = (k1.len() / 2) as isize;
    let r2 = (k2.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for j in 0..n2 {
        for i in 0..n1 {
            let mut acc = 0.0;
            for (m, w) in k1.iter().enumerate() {
                let ii = reflect(i as isize + m as isize - r1, n1);
                acc += w * values[j * n1 + ii];
            }
            tmp[j * n1 + i] = acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for j in 0..n2 {
        for i in 0..n1 {
            let mut acc = 0.0;
            for (m, w) in k2.iter().enumerate() {
                let jj = reflect(j as isize + m as isize - r2, n2);
                acc += w * tmp[jj * n1 + i];
            }
            out[j * n1 + i] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-4, 5), 4);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(9, 5), 1);
        assert_eq!(reflect(2, 5), 2);
    }

    #[test]
    fn constants_are_preserved_and_linear_data_fixed_in_the_interior() {
        let (n1, n2) = (30, 20);
        let c = vec![2.5; n1 * n2];
        let s = gaussian_smooth(&c, n1, n2, 3.0, 2.0);
        assert!(s.iter().all(|v| (v - 2.5).abs() < 1e-13));
        let lin: Vec<f64> = (0..n1 * n2).map(|k| (k % n1) as f64 * 0.1).collect();
        let s = gaussian_smooth(&lin, n1, n2, 2.0, 2.0);
        for i in 9..21 {
            assert!((s[5 * n1 + i] - i as f64 * 0.1).abs() < 1e-12);
        }
    }
}
