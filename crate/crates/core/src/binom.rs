//! Binomial probability tables evaluated in log space.

/// `ln k!` for `k = 0..=n_max`.
#[derive(Debug, Clone)]
pub struct LnFactorial(Vec<f64>);

impl LnFactorial {
    pub fn new(n_max: usize) -> Self {
        let mut table = Vec::with_capacity(n_max + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for k in 1..=n_max {
            acc += (k as f64).ln();
            table.push(acc);
        }
        LnFactorial(table)
    }

    pub fn n_max(&self) -> usize {
        self.0.len() - 1
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.0[n] - self.0[k] - self.0[n - k]
    }
}

/// `Bi(u; n, p)` with the exact branches `p = 0` and `p = 1` (`0^0 = 1`).
pub fn pmf(lf: &LnFactorial, u: usize, n: usize, p: f64) -> f64 {
    if u > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if u == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if u == n { 1.0 } else { 0.0 };
    }
    let ln = lf.ln_choose(n, u) + u as f64 * p.ln() + (n - u) as f64 * (-p).ln_1p();
    ln.exp()
}

/// Triangular table of `Bi(u; n, p)` for all `0 ≤ u ≤ n ≤ n_max` at a fixed `p`,
/// together with the lower cumulative sums.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    n_max: usize,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

#[inline]
fn row_start(n: usize) -> usize {
    n * (n + 1) / 2
}

impl BinomialTable {
    pub fn new(lf: &LnFactorial, n_max: usize, p: f64) -> Self {
        assert!(n_max <= lf.n_max(), "log-factorial table too short");
        let len = row_start(n_max + 1);
        let mut pmf_v = vec![0.0; len];
        let mut cdf_v = vec![0.0; len];
        let interior = p > 0.0 && p < 1.0;
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        for n in 0..=n_max {
            let s = row_start(n);
            let mut acc = 0.0;
            for u in 0..=n {
                let v = if interior {
                    (lf.ln_choose(n, u) + u as f64 * lp + (n - u) as f64 * lq).exp()
                } else {
                    pmf(lf, u, n, p)
                };
                pmf_v[s + u] = v;
                acc += v;
                cdf_v[s + u] = acc;
            }
        }
        BinomialTable {
            n_max,
            pmf: pmf_v,
            cdf: cdf_v,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `Bi(u; n, p)`, zero outside `0 ≤ u ≤ n`.
    #[inline]
    pub fn pmf(&self, u: usize, n: usize) -> f64 {
        if u > n {
            0.0
        } else {
            self.pmf[row_start(n) + u]
        }
    }

    /// `P(Bin(n, p) ≤ u)`.
    #[inline]
    pub fn cdf(&self, u: usize, n: usize) -> f64 {
        if u >= n {
            self.cdf[row_start(n) + n]
        } else {
            self.cdf[row_start(n) + u]
        }
    }
}

/// Largest integer `u` with `u < k`, or `None` when `k ≤ 0`.
#[inline]
pub fn max_below(k: f64) -> Option<usize> {
    if k <= 0.0 {
        None
    } else {
        Some((k.ceil() - 1.0) as usize)
    }
}
