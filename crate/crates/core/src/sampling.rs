//! Initial-condition samplers: thermal nuclear phase points, uniform Bloch
//! vectors for spin mapping, and focused pole states for Ehrenfest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::BathSpec;

/// Nuclear phase point of the discretized bath.
#[derive(Clone, Debug)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

/// Initial distribution of the bath modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathInit {
    Classical,
    Wigner,
}

/// Pauli-basis index: 0 = I, 1 = x, 2 = y, 3 = z.
pub type PauliIndex = usize;

/// A pole state of the Bloch sphere with a signed ensemble weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocusedState {
    pub u0: [f64; 3],
    pub weight: f64,
}

/// Deterministic per-trajectory RNG: fixed master seed, trajectory index as
/// the stream, so ensembles are order-independent and resumable.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw a thermal phase point for every bath mode.
///
/// Classical: q ~ N(0, 1/(beta m w^2)), p ~ N(0, m/beta).
/// Wigner: q ~ N(0, coth(beta w / 2)/(2 m w)), p ~ N(0, m w coth(beta w/2)/2).
pub fn sample_bath<R: Rng>(
    bath: &BathSpec,
    beta: f64,
    mode: BathInit,
    rng: &mut R,
) -> Result<PhasePoint, Error> {
    if !(beta > 0.0) {
        return Err(Error::InvalidSpec(format!("beta must be > 0, got {beta}")));
    }
    let f = bath.n_modes();
    let mut q = Vec::with_capacity(f);
    let mut p = Vec::with_capacity(f);
    for alpha in 0..f {
        let m = bath.m[alpha];
        let w = bath.omega[alpha];
        let (sig_q, sig_p) = match mode {
            BathInit::Classical => ((1.0 / (beta * m)).sqrt() / w, (m / beta).sqrt()),
            BathInit::Wigner => {
                let coth = 1.0 / (0.5 * beta * w).tanh();
                ((coth / (2.0 * m * w)).sqrt(), (m * w * coth / 2.0).sqrt())
            }
        };
        let gq: f64 = StandardNormal.sample(rng);
        let gp: f64 = StandardNormal.sample(rng);
        q.push(sig_q * gq);
        p.push(sig_p * gp);
    }
    Ok(PhasePoint { q, p })
}

/// Uniform point on the unit sphere, via uniform cos(theta) and phi.
pub fn sample_bloch_uniform<R: Rng>(rng: &mut R) -> [f64; 3] {
    let cos_theta: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    [sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta]
}

/// Focused initial states for the Ehrenfest correlation function row `mu`:
/// opposite poles with signed weights for the Pauli rows, both poles with
/// weight +1/2 for the identity row.
pub fn focused_initial_states(mu: PauliIndex) -> Vec<FocusedState> {
    let axis = |k: usize, sign: f64| {
        let mut u = [0.0; 3];
        u[k] = sign;
        u
    };
    match mu {
        0 => vec![
            FocusedState { u0: axis(2, 1.0), weight: 0.5 },
            FocusedState { u0: axis(2, -1.0), weight: 0.5 },
        ],
        1..=3 => vec![
            FocusedState { u0: axis(mu - 1, 1.0), weight: 0.5 },
            FocusedState { u0: axis(mu - 1, -1.0), weight: -0.5 },
        ],
        _ => panic!("Pauli index out of range: {mu}"),
    }
}

/// Error measure between the classical and Wigner bath distributions:
/// beta w_c / 2 - tanh(beta w_c / 2).
pub fn wigner_classical_gap(beta: f64, omega_c: f64) -> f64 {
    let x = 0.5 * beta * omega_c;
    x - x.tanh()
}
