//! Spin-boson model definition: electronic parameters, Ohmic bath
//! discretization, and the constant Pauli-basis coupling matrices.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tensor::Mat4;

/// Physical parameters of the spin-boson model (hbar = 1 throughout).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Electronic coupling between the two states.
    pub delta: f64,
    /// Half energy bias; the states are separated by 2*eps.
    pub eps: f64,
    /// Kondo parameter of the Ohmic spectral density.
    pub xi: f64,
    /// Cutoff frequency of the Ohmic spectral density.
    pub omega_c: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Number of discretized bath modes.
    pub f_modes: usize,
    /// Per-mode nuclear mass.
    pub mass: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        // Parameter regime used throughout: Delta = xi = omega_c = 1, beta = 0.3
        ModelSpec {
            delta: 1.0,
            eps: 0.0,
            xi: 1.0,
            omega_c: 1.0,
            beta: 0.3,
            f_modes: 100,
            mass: 1.0,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidSpec(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.omega_c > 0.0) {
            return Err(Error::InvalidSpec(format!("omega_c must be > 0, got {}", self.omega_c)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidSpec(format!("beta must be > 0, got {}", self.beta)));
        }
        if self.f_modes < 1 {
            return Err(Error::InvalidSpec("f_modes must be >= 1".into()));
        }
        if !(self.mass > 0.0) {
            return Err(Error::InvalidSpec(format!("mass must be > 0, got {}", self.mass)));
        }
        if !self.eps.is_finite() || !self.xi.is_finite() {
            return Err(Error::InvalidSpec("eps and xi must be finite".into()));
        }
        Ok(())
    }

    /// Bath reorganization energy sum c^2/(2 m w^2) = xi * omega_c / 2,
    /// exact for the discretization used here.
    pub fn reorganization_energy(&self) -> f64 {
        0.5 * self.xi * self.omega_c
    }

    /// Absorb a constant offset of the z coupling operator into the bias so
    /// that the bath average of the coupling vanishes.
    pub fn shift_to_zero_mean(&self, v0: f64) -> ModelSpec {
        ModelSpec {
            eps: self.eps + v0,
            ..*self
        }
    }
}

/// Discretized harmonic bath: frequencies, couplings and masses per mode.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BathSpec {
    pub omega: Vec<f64>,
    pub c: Vec<f64>,
    pub m: Vec<f64>,
}

impl BathSpec {
    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    /// sum_a c_a^2 / (2 m_a w_a^2)
    pub fn reorganization_energy(&self) -> f64 {
        self.omega
            .iter()
            .zip(&self.c)
            .zip(&self.m)
            .map(|((&w, &c), &m)| c * c / (2.0 * m * w * w))
            .sum()
    }

    /// Thermal variance of the coupling coordinate sum_a c_a q_a under the
    /// classical Boltzmann distribution: sum c^2/(beta m w^2).
    pub fn coupling_variance_classical(&self, beta: f64) -> f64 {
        2.0 * self.reorganization_energy() / beta
    }
}

/// Discretize the Ohmic spectral density J(w) = (pi xi / 2) w exp(-w/w_c)
/// into `f_modes` oscillators.
///
/// The frequencies are chosen by equal-weight sampling of the density
/// J(w)/w, giving w_a = w_c ln(F/(a - 1/2)) and c_a = w_a sqrt(xi m w_c / F).
/// This reproduces the reorganization energy xi w_c / 2 exactly for any F.
pub fn build_bath(spec: &ModelSpec) -> Result<BathSpec, Error> {
    spec.validate()?;
    let f = spec.f_modes;
    let mut omega = Vec::with_capacity(f);
    let mut c = Vec::with_capacity(f);
    let m = vec![spec.mass; f];
    let fac = (spec.xi * spec.mass * spec.omega_c / f as f64).sqrt();
    for alpha in 1..=f {
        let w = spec.omega_c * (f as f64 / (alpha as f64 - 0.5)).ln();
        omega.push(w);
        c.push(w * fac);
    }
    Ok(BathSpec { omega, c, m })
}

/// Constant 4x4 matrices of the Pauli-basis formulation for a model with a
/// pure sigma_z system-bath coupling.  Rows/columns are ordered (I, x, y, z).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PauliMatrices {
    /// Antisymmetric free-evolution generator.
    pub x_mat: Mat4,
    /// Commutator coupling matrix for the z channel.
    pub y_z: Mat4,
    /// Anticommutator coupling matrix for the z channel.
    pub z_z: Mat4,
}

/// X, Y^(z) and Z^(z) for system Hamiltonian Delta*sigma_x + eps*sigma_z.
pub fn coupling_matrices(spec: &ModelSpec) -> PauliMatrices {
    let mut x = Mat4::ZERO;
    x.set(1, 2, 2.0 * spec.eps);
    x.set(2, 1, -2.0 * spec.eps);
    x.set(2, 3, 2.0 * spec.delta);
    x.set(3, 2, -2.0 * spec.delta);

    let mut y = Mat4::ZERO;
    y.set(1, 2, 2.0);
    y.set(2, 1, -2.0);

    let mut z = Mat4::ZERO;
    z.set(0, 3, 2.0);
    z.set(3, 0, 2.0);

    PauliMatrices {
        x_mat: x,
        y_z: y,
        z_z: z,
    }
}

/// Quasiclassical mapping variant: the radius of the spin sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingKind {
    Ehrenfest,
    SpinW,
}

impl MappingKind {
    pub fn radius(&self) -> f64 {
        match self {
            MappingKind::Ehrenfest => 1.0,
            MappingKind::SpinW => 3.0f64.sqrt(),
        }
    }
}

/// Mapped Hamiltonian H_b(q, p) + r [Delta u_x + (eps + sum_a c_a q_a) u_z].
pub fn mapped_hamiltonian(
    u: &[f64; 3],
    q: &[f64],
    p: &[f64],
    spec: &ModelSpec,
    bath: &BathSpec,
    kind: MappingKind,
) -> f64 {
    let mut h_b = 0.0;
    let mut v = 0.0;
    for alpha in 0..bath.n_modes() {
        let m = bath.m[alpha];
        let w = bath.omega[alpha];
        h_b += 0.5 * (p[alpha] * p[alpha] / m + m * w * w * q[alpha] * q[alpha]);
        v += bath.c[alpha] * q[alpha];
    }
    h_b + kind.radius() * (spec.delta * u[0] + (spec.eps + v) * u[2])
}
