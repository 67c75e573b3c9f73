//! Shifted Legendre polynomials, orthonormal on `[0, 1]`:
//! `P_j(x) = √(2j+1) Σ_k (-1)^(j+k) C(j,k) C(j+k,k) x^k`.

/// Integer monomial coefficients of `P_j / √(2j+1)`.
fn integer_coeffs(j: usize) -> Vec<i128> {
    (0..=j)
        .map(|k| {
            let sign = if (j + k).is_multiple_of(2) { 1 } else { -1 };
            sign * binomial(j, k) * binomial(j + k, k)
        })
        .collect()
}

fn binomial(n: usize, k: usize) -> i128 {
    let k = k.min(n - k);
    let mut r: i128 = 1;
    for i in 0..k {
        r = r * (n - i) as i128 / (i + 1) as i128;
    }
    r
}

/// Monomial coefficients of `P_0 … P_{n-1}` and of every product
/// `P_j P_k` (degree ≤ 2n−2). Integer parts are combined exactly before the
/// single rounding to `f64`.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    n: usize,
    /// `poly[j][m]`
    poly: Vec<Vec<f64>>,
    /// `products[(j * n + k) * (2n-1) + m]`
    products: Vec<f64>,
    /// Upper-triangle pairs `(j, k)`, `j ≤ k`, with their coefficients
    /// stored contiguously in `upper`.
    pairs: Vec<(usize, usize)>,
    upper: Vec<f64>,
}

impl LegendreTable {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let ints: Vec<Vec<i128>> = (0..n).map(integer_coeffs).collect();
        let norms: Vec<f64> = (0..n).map(|j| ((2 * j + 1) as f64).sqrt()).collect();
        let poly = ints
            .iter()
            .zip(&norms)
            .map(|(c, s)| c.iter().map(|&v| v as f64 * s).collect())
            .collect();
        let deg = 2 * n - 1;
        let mut products = vec![0.0; n * n * deg];
        for j in 0..n {
            for k in j..n {
                let mut acc = vec![0i128; deg];
                for (p, &a) in ints[j].iter().enumerate() {
                    for (q, &b) in ints[k].iter().enumerate() {
                        acc[p + q] += a * b;
                    }
                }
                let scale = ((2 * j + 1) as f64 * (2 * k + 1) as f64).sqrt();
                for m in 0..deg {
                    let v = acc[m] as f64 * scale;
                    products[(j * n + k) * deg + m] = v;
                    products[(k * n + j) * deg + m] = v;
                }
            }
        }
        let mut pairs = Vec::new();
        let mut upper = Vec::new();
        for j in 0..n {
            for k in j..n {
                pairs.push((j, k));
                upper.extend_from_slice(&products[(j * n + k) * deg..(j * n + k + 1) * deg]);
            }
        }
        Self {
            n,
            poly,
            products,
            pairs,
            upper,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of power moments a Gram matrix needs: `2n − 1`.
    pub fn moments(&self) -> usize {
        2 * self.n - 1
    }

    pub fn coeffs(&self, j: usize) -> &[f64] {
        &self.poly[j]
    }

    /// Monomial coefficients of `P_j P_k`.
    pub fn product(&self, j: usize, k: usize) -> &[f64] {
        let deg = self.moments();
        let off = (j * self.n + k) * deg;
        &self.products[off..off + deg]
    }

    /// `P_j(x)` by Horner on the monomial form.
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        self.poly[j].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// All `P_j(x)` by the three-term recurrence (stable for x ∈ [0,1]).
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        let t = 2.0 * x - 1.0;
        // Legendre on [-1,1]: (j+1) L_{j+1} = (2j+1) t L_j − j L_{j−1}
        let mut prev = 1.0;
        let mut cur = t;
        for (j, o) in out.iter_mut().enumerate().take(self.n) {
            let l = match j {
                0 => 1.0,
                1 => t,
                _ => {
                    let next = ((2 * j - 1) as f64 * t * cur - (j - 1) as f64 * prev) / j as f64;
                    prev = cur;
                    cur = next;
                    next
                }
            };
            *o = l * ((2 * j + 1) as f64).sqrt();
        }
    }

    /// Gram matrix `Σ_m c^{jk}_m μ_m` from power moments `μ_0 … μ_{2n-2}`.
    pub fn gram_from_moments(&self, moments: &[f64], out: &mut [f64]) {
        let n = self.n;
        let deg = self.moments();
        let moments = &moments[..deg];
        for (&(j, k), c) in self.pairs.iter().zip(self.upper.chunks_exact(deg)) {
            let v: f64 = c.iter().zip(moments).map(|(c, u)| c * u).sum();
            out[j * n + k] = v;
            out[k * n + j] = v;
        }
    }
}
