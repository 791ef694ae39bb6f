//! Brute-force oracles over GF(2) with matrices stored as row bitmasks.
//! Independent of the crate's bit-matrix code; sizes stay at n ≤ 12 columns.

use rand::Rng;

/// m × n matrix over GF(2); bit j of `rows[i]` is entry (i, j).
#[derive(Clone, Debug)]
pub struct MaskMatrix {
    pub n: usize,
    pub rows: Vec<u32>,
}

impl MaskMatrix {
    pub fn mul(&self, v: u32) -> u32 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |s, (i, r)| s | (((r & v).count_ones() & 1) << i))
    }

    pub fn codewords(&self) -> Vec<u32> {
        (0..1u32 << self.n).filter(|&v| self.mul(v) == 0).collect()
    }
}

/// Random H = [[1, B1], [0, B2]] with m rows and n columns whose code holds a
/// word with first bit 1. Column 0 is the decoded position.
pub fn random_block_matrix<R: Rng>(rng: &mut R, m: usize, n: usize) -> MaskMatrix {
    assert!((2..=12).contains(&n) && m >= 2);
    let body = (1u32 << n) - 2;
    loop {
        let mut rows = vec![1 | (rng.random::<u32>() & body)];
        rows.extend((1..m).map(|_| rng.random::<u32>() & body));
        let h = MaskMatrix { n, rows };
        if h.codewords().iter().any(|c| c & 1 == 1) {
            return h;
        }
    }
}

/// Exact nonnegative rational.
#[derive(Clone, Copy, Debug)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl PartialEq for Ratio {
    fn eq(&self, o: &Self) -> bool {
        self.num * o.den == o.num * self.den
    }
}

/// Integer weight of a noise pattern on `len` positions, flips with probability p/q,
/// scaled by q^len.
fn weight(z: u32, len: usize, p: u128, q: u128) -> u128 {
    let w = z.count_ones();
    p.pow(w) * (q - p).pow(len as u32 - w)
}

/// Minimum error of decoding codeword bit 0 from X + Z, X uniform on the code,
/// Z_0 a fair bit and the other Z i.i.d. with flip probability p/q.
pub fn coding_ml_error(h: &MaskMatrix, p: u128, q: u128) -> Ratio {
    let n = h.n;
    let code = h.codewords();
    let half = code.iter().filter(|c| *c & 1 == 0).count() as u128;
    // Z_0 is uniform, so the likelihood of y depends on y_2 only; both values of
    // y_1 contribute the same term.
    let mut sum = 0u128;
    for y2 in 0..1u32 << (n - 1) {
        let mut lik = [0u128; 2];
        for &c in &code {
            lik[(c & 1) as usize] += weight(y2 ^ (c >> 1), n - 1, p, q);
        }
        sum += 2 * lik[0].min(lik[1]);
    }
    // P(y | b) = lik_b(y2) / (2 · half · q^(n−1)); error = ½ Σ_y min.
    Ratio {
        num: sum,
        den: 4 * half * q.pow(n as u32 - 1),
    }
}

/// Minimum error of decoding X' from S' = H [X'; Z].
pub fn inference_ml_error(h: &MaskMatrix, p: u128, q: u128) -> Ratio {
    let n = h.n;
    let m = h.rows.len();
    let mut lik = vec![[0u128; 2]; 1 << m];
    for x in 0..2u32 {
        for z in 0..1u32 << (n - 1) {
            lik[h.mul(x | (z << 1)) as usize][x as usize] += weight(z, n - 1, p, q);
        }
    }
    Ratio {
        num: lik.iter().map(|l| l[0].min(l[1])).sum(),
        den: 2 * q.pow(n as u32 - 1),
    }
}
