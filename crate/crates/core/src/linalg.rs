use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Orthonormal basis of `p^⊥` as the columns of a `d × (d-1)` matrix, taken
/// from the Householder reflector that maps `p/|p|` to a coordinate axis.
pub fn orthonormal_complement(p: &DVector<f64>) -> DMatrix<f64> {
    let d = p.len();
    let u = p / p.norm();
    let mut v = u.clone();
    let sign = if u[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.dot(&v);
    let house = DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / vv);
    house.columns(1, d - 1).into_owned()
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Unit vector `e_k` in `R^d`.
pub fn unit(d: usize, k: usize) -> DVector<f64> {
    let mut e = DVector::zeros(d);
    e[k] = 1.0;
    e
}

/// Deterministic set of `count` directions on the unit sphere `S^{d-1}`.
///
/// The `2d` signed coordinate axes come first. The rest is an evenly spaced
/// circle (d = 2), a Fibonacci lattice under a seeded random rotation
/// (d = 3), or seeded Gaussian directions otherwise.
pub fn sphere_directions(d: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count.max(2 * d));
    for k in 0..d {
        out.push(unit(d, k));
        out.push(-unit(d, k));
    }
    if count <= out.len() {
        out.truncate(count.max(1));
        return out;
    }
    let rest = count - out.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match d {
        1 => {}
        2 => {
            let offset: f64 = rand::Rng::random(&mut rng);
            for k in 0..rest {
                let a = std::f64::consts::TAU * (k as f64 + offset) / rest as f64;
                out.push(DVector::from_vec(vec![a.cos(), a.sin()]));
            }
        }
        3 => {
            let rot = random_rotation(3, &mut rng);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for k in 0..rest {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / rest as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * k as f64;
                let v = DVector::from_vec(vec![r * a.cos(), r * a.sin(), z]);
                out.push(&rot * v);
            }
        }
        _ => {
            for _ in 0..rest {
                out.push(random_unit(d, &mut rng));
            }
        }
    }
    out
}

pub fn random_unit(d: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let n: f64 = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

pub fn random_rotation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    m.qr().q()
}
