//! Block-tridiagonal system with 2×2 blocks, solved by block Thomas elimination.

pub type Block = [[f64; 2]; 2];

#[derive(Debug, Clone)]
pub struct BlockTridiagonal {
    /// Coupling of row block `i` to unknowns of block `i − 1` (entry 0 unused).
    pub lower: Vec<Block>,
    pub diag: Vec<Block>,
    /// Coupling of row block `i` to unknowns of block `i + 1` (last entry unused).
    pub upper: Vec<Block>,
}

fn inv(b: &Block) -> Option<Block> {
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    let scale = b.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(det.abs() > 1e-300 && det.abs() > f64::EPSILON * 1e-6 * scale * scale) {
        return None;
    }
    let d = 1.0 / det;
    Some([[b[1][1] * d, -b[0][1] * d], [-b[1][0] * d, b[0][0] * d]])
}

fn mul(a: &Block, b: &Block) -> Block {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn mulv(a: &Block, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

impl BlockTridiagonal {
    pub fn zeros(n: usize) -> Self {
        BlockTridiagonal {
            lower: vec![[[0.0; 2]; 2]; n],
            diag: vec![[[0.0; 2]; 2]; n],
            upper: vec![[[0.0; 2]; 2]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Solves `A x = rhs`; returns `None` on a singular pivot block.
    pub fn solve(&self, rhs: &[[f64; 2]]) -> Option<Vec<[f64; 2]>> {
        let n = self.len();
        if n == 0 {
            return Some(Vec::new());
        }
        let mut c_prime: Vec<Block> = vec![[[0.0; 2]; 2]; n];
        let mut d_prime: Vec<[f64; 2]> = vec![[0.0; 2]; n];
        let mut piv = inv(&self.diag[0])?;
        c_prime[0] = mul(&piv, &self.upper[0]);
        d_prime[0] = mulv(&piv, rhs[0]);
        for i in 1..n {
            let lc = mul(&self.lower[i], &c_prime[i - 1]);
            let mut m = self.diag[i];
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] -= lc[r][c];
                }
            }
            piv = inv(&m)?;
            if i + 1 < n {
                c_prime[i] = mul(&piv, &self.upper[i]);
            }
            let ld = mulv(&self.lower[i], d_prime[i - 1]);
            d_prime[i] = mulv(&piv, [rhs[i][0] - ld[0], rhs[i][1] - ld[1]]);
        }
        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            let cx = mulv(&c_prime[i], x[i + 1]);
            x[i][0] -= cx[0];
            x[i][1] -= cx[1];
        }
        Some(x)
    }

    #[cfg(test)]
    pub fn apply(&self, x: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = mulv(&self.diag[i], x[i]);
                if i > 0 {
                    let l = mulv(&self.lower[i], x[i - 1]);
                    y[0] += l[0];
                    y[1] += l[1];
                }
                if i + 1 < n {
                    let u = mulv(&self.upper[i], x[i + 1]);
                    y[0] += u[0];
                    y[1] += u[1];
                }
                y
            })
            .collect()
    }
}
