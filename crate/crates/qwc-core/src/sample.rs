//! Seeded random matrices and parameters.
//!
//! Property tests, acceptance checks and the CLI self test all draw their
//! inputs from here so that every run is reproducible from a single `u64`
//! seed.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ito::GeneratorParams;
use crate::mat::{c64, mat_exp, op_norm, ComplexMatrix};

/// Deterministic source of random test data backed by ChaCha8.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Standard normal variate via the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        let u1: f64 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Complex Gaussian with independent real and imaginary parts of the
    /// given standard deviation.
    pub fn complex(&mut self, scale: f64) -> Complex64 {
        c64(scale * self.normal(), scale * self.normal())
    }

    pub fn vector(&mut self, dim: usize, scale: f64) -> Vec<Complex64> {
        (0..dim).map(|_| self.complex(scale)).collect()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
        let entries = (0..rows * cols).map(|_| self.complex(scale)).collect();
        ComplexMatrix::new(rows, cols, entries).expect("gaussian entries are finite")
    }

    /// Random Hermitian matrix `(M + M*)/2`.
    pub fn hermitian(&mut self, n: usize, scale: f64) -> ComplexMatrix {
        let m = self.matrix(n, n, scale);
        (&m + &m.adjoint()).scale(c64(0.5, 0.0))
    }

    /// Random skewadjoint matrix `(M − M*)/2`.
    pub fn skewadjoint(&mut self, n: usize, scale: f64) -> ComplexMatrix {
        let m = self.matrix(n, n, scale);
        (&m - &m.adjoint()).scale(c64(0.5, 0.0))
    }

    /// Random unitary, the exponential of a random skewadjoint matrix.
    pub fn unitary(&mut self, n: usize) -> ComplexMatrix {
        let k = self.skewadjoint(n, 1.0);
        mat_exp(&k).expect("exponential of a finite matrix")
    }

    /// Random strict contraction: a Gaussian matrix shrunk to spectral norm
    /// strictly below one.
    pub fn contraction(&mut self, rows: usize, cols: usize) -> ComplexMatrix {
        let m = self.matrix(rows, cols, 1.0);
        let norm = op_norm(&m).expect("norm of a finite matrix");
        m.scale(c64(1.0 / (norm + 0.1), 0.0))
    }

    /// Random generator parameters `(Z, L, W)` with no structure imposed.
    pub fn generator_params(&mut self, dim_h: usize, dim_k: usize, scale: f64) -> GeneratorParams {
        GeneratorParams {
            z: self.matrix(dim_h, dim_h, scale),
            l: self.matrix(dim_h * dim_k, dim_h, scale),
            w: self.matrix(dim_h * dim_k, dim_h * dim_k, scale),
        }
    }

    /// Random parameters with skewadjoint `Z` and unitary `W`, the shape of a
    /// unitary cocycle generator.
    pub fn unitary_generator_params(&mut self, dim_h: usize, dim_k: usize) -> GeneratorParams {
        GeneratorParams {
            z: self.skewadjoint(dim_h, 1.0),
            l: self.matrix(dim_h * dim_k, dim_h, 1.0),
            w: self.unitary(dim_h * dim_k),
        }
    }
}
