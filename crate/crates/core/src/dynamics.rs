//! Fixed-step RK4 propagation of the coupled Bloch-vector/nuclear equations
//! of motion.  The state is stored flat as [u_x, u_y, u_z, q_1..q_F, p_1..p_F].

use crate::error::Error;
use crate::model::{mapped_hamiltonian, BathSpec, MappingKind, ModelSpec};

/// One snapshot of a trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub u: [f64; 3],
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

/// Reusable fixed-step RK4 integrator for one model; holds scratch buffers
/// so that per-trajectory propagation does not allocate.
pub struct Propagator {
    pub delta: f64,
    pub eps: f64,
    pub radius: f64,
    pub omega: Vec<f64>,
    pub c: Vec<f64>,
    pub inv_m: Vec<f64>,
    pub m_w2: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Propagator {
    pub fn new(spec: &ModelSpec, bath: &BathSpec, kind: MappingKind) -> Propagator {
        let f = bath.n_modes();
        let dim = 3 + 2 * f;
        Propagator {
            delta: spec.delta,
            eps: spec.eps,
            radius: kind.radius(),
            omega: bath.omega.clone(),
            c: bath.c.clone(),
            inv_m: bath.m.iter().map(|m| 1.0 / m).collect(),
            m_w2: bath
                .m
                .iter()
                .zip(&bath.omega)
                .map(|(m, w)| m * w * w)
                .collect(),
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn dim(&self) -> usize {
        3 + 2 * self.n_modes()
    }

    /// Coupling coordinate V(q) = sum_a c_a q_a for a flat state.
    #[inline]
    pub fn coupling_coordinate(&self, state: &[f64]) -> f64 {
        let f = self.n_modes();
        let mut v = 0.0;
        for a in 0..f {
            v += self.c[a] * state[3 + a];
        }
        v
    }

    /// du/dt = 2 H x u with H = (Delta, 0, eps + sum c q);
    /// dq/dt = p/m; dp/dt = -m w^2 q - c r u_z.
    #[inline]
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        let f = self.n_modes();
        let (ux, uy, uz) = (state[0], state[1], state[2]);
        let hz = self.eps + self.coupling_coordinate(state);
        let hx = self.delta;
        // u' = 2 (H x u), H = (hx, 0, hz)
        out[0] = 2.0 * (-hz * uy);
        out[1] = 2.0 * (hz * ux - hx * uz);
        out[2] = 2.0 * (hx * uy);
        let force_u = self.radius * uz;
        for a in 0..f {
            out[3 + a] = state[3 + f + a] * self.inv_m[a];
            out[3 + f + a] = -self.m_w2[a] * state[3 + a] - self.c[a] * force_u;
        }
    }

    /// One RK4 step in place.
    pub fn step(&mut self, state: &mut [f64], dt: f64) {
        let dim = state.len();
        debug_assert_eq!(dim, self.dim());
        let half = 0.5 * dt;
        // borrow-splitting: take buffers out of self temporarily
        let mut k1 = std::mem::take(&mut self.k1);
        let mut k2 = std::mem::take(&mut self.k2);
        let mut k3 = std::mem::take(&mut self.k3);
        let mut k4 = std::mem::take(&mut self.k4);
        let mut tmp = std::mem::take(&mut self.tmp);

        self.rhs(state, &mut k1);
        for i in 0..dim {
            tmp[i] = state[i] + half * k1[i];
        }
        self.rhs(&tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = state[i] + half * k2[i];
        }
        self.rhs(&tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = state[i] + dt * k3[i];
        }
        self.rhs(&tmp, &mut k4);
        let sixth = dt / 6.0;
        for i in 0..dim {
            state[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }

        // The precession du/dt = 2 H x u conserves |u| exactly, but RK4
        // damps it by ~(2|H| dt)^6/72 per step; at strong bias that
        // compounds into a visible shrinkage of the spin over ~10^5-step
        // trajectories.  Project back onto the sphere each step.
        let n = (state[0] * state[0] + state[1] * state[1] + state[2] * state[2]).sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            state[0] *= inv;
            state[1] *= inv;
            state[2] *= inv;
        }

        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.k4 = k4;
        self.tmp = tmp;
    }
}

/// Propagate a trajectory and record snapshots every `stride` steps
/// (including the initial state).  Aborts with an error if any component
/// becomes non-finite.
#[allow(clippy::too_many_arguments)]
pub fn propagate(
    u0: [f64; 3],
    q0: &[f64],
    p0: &[f64],
    dt: f64,
    n_steps: usize,
    stride: usize,
    spec: &ModelSpec,
    bath: &BathSpec,
    kind: MappingKind,
) -> Result<Vec<TrajectoryState>, Error> {
    assert!(dt > 0.0, "dt must be positive");
    assert!(stride >= 1);
    let f = bath.n_modes();
    let mut prop = Propagator::new(spec, bath, kind);
    let mut state = Vec::with_capacity(3 + 2 * f);
    state.extend_from_slice(&u0);
    state.extend_from_slice(q0);
    state.extend_from_slice(p0);

    let snapshot = |s: &[f64], t: f64| TrajectoryState {
        u: [s[0], s[1], s[2]],
        q: s[3..3 + f].to_vec(),
        p: s[3 + f..].to_vec(),
        t,
    };

    let mut out = Vec::with_capacity(n_steps / stride + 1);
    out.push(snapshot(&state, 0.0));
    for step in 1..=n_steps {
        prop.step(&mut state, dt);
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::TrajectoryBlowup { index: 0, step });
        }
        if step % stride == 0 {
            out.push(snapshot(&state, step as f64 * dt));
        }
    }
    Ok(out)
}

/// Norm of the Bloch vector.
pub fn bloch_norm(u: &[f64; 3]) -> f64 {
    (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt()
}

/// Mapped energy of a snapshot.
pub fn snapshot_energy(
    s: &TrajectoryState,
    spec: &ModelSpec,
    bath: &BathSpec,
    kind: MappingKind,
) -> f64 {
    mapped_hamiltonian(&s.u, &s.q, &s.p, spec, bath, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_bath;
    use crate::sampling::{sample_bath, trajectory_rng, BathInit};

    fn free_spin_spec() -> (ModelSpec, BathSpec) {
        // decoupled spin: zero couplings, Delta = 1, eps = 0
        let spec = ModelSpec {
            delta: 1.0,
            eps: 0.0,
            f_modes: 1,
            ..Default::default()
        };
        let mut bath = build_bath(&spec).unwrap();
        bath.c[0] = 0.0;
        (spec, bath)
    }

    #[test]
    fn rhs_hand_values() {
        let spec = ModelSpec {
            delta: 1.0,
            eps: 5.0,
            f_modes: 1,
            ..Default::default()
        };
        let mut bath = build_bath(&spec).unwrap();
        bath.c[0] = 0.0;
        let prop = Propagator::new(&spec, &bath, MappingKind::SpinW);
        let state = [0.0, 0.0, 1.0, 0.0, 0.0];
        let mut out = [0.0; 5];
        prop.rhs(&state, &mut out);
        // H = (1, 0, 5), u = z-hat -> u' = 2 H x u = (0, -2, 0)
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], -2.0);
        assert_eq!(out[2], 0.0);
        // q = p = 0 and u_z couples only through c = 0
        assert_eq!(out[3], 0.0);
        assert_eq!(out[4], 0.0);
    }

    #[test]
    fn force_vanishes_on_equator() {
        let spec = ModelSpec {
            f_modes: 2,
            ..Default::default()
        };
        let bath = build_bath(&spec).unwrap();
        let prop = Propagator::new(&spec, &bath, MappingKind::SpinW);
        let state = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut out = [0.0; 7];
        prop.rhs(&state, &mut out);
        assert_eq!(out[5], 0.0);
        assert_eq!(out[6], 0.0);
    }

    #[test]
    fn free_spin_precession_analytic() {
        // c = 0, Delta = 1, eps = 0, u(0) = z-hat: u(t) = (0, -sin 2t, cos 2t)
        let (spec, bath) = free_spin_spec();
        let traj = propagate(
            [0.0, 0.0, 1.0],
            &[0.0],
            &[0.0],
            0.01,
            500,
            1,
            &spec,
            &bath,
            MappingKind::SpinW,
        )
        .unwrap();
        let mut max_err = 0.0f64;
        for s in &traj {
            let expect = [0.0, -(2.0 * s.t).sin(), (2.0 * s.t).cos()];
            for i in 0..3 {
                max_err = max_err.max((s.u[i] - expect[i]).abs());
            }
        }
        // RK4 global error over 500 steps at dt = 0.01 sits near 1.3e-8
        assert!(max_err < 1e-7, "max error {max_err}");
    }

    #[test]
    fn norm_and_energy_drift() {
        let spec = ModelSpec {
            eps: 5.0,
            f_modes: 20,
            ..Default::default()
        };
        let bath = build_bath(&spec).unwrap();
        let mut rng = trajectory_rng(5, 2);
        let pt = sample_bath(&bath, spec.beta, BathInit::Classical, &mut rng).unwrap();
        let u0 = crate::sampling::sample_bloch_uniform(&mut rng);
        let traj = propagate(
            u0, &pt.q, &pt.p, 0.01, 500, 10, &spec, &bath, MappingKind::SpinW,
        )
        .unwrap();
        let e0 = snapshot_energy(&traj[0], &spec, &bath, MappingKind::SpinW);
        let scale = e0.abs().max(1.0);
        // the per-step renormalization keeps |u| = 1 to round-off
        for s in &traj {
            assert!((bloch_norm(&s.u) - 1.0).abs() < 1e-12, "norm drift {}", bloch_norm(&s.u) - 1.0);
            let e = snapshot_energy(s, &spec, &bath, MappingKind::SpinW);
            assert!(((e - e0) / scale).abs() < 2e-4);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        // halving dt shrinks the endpoint error ~16x against a fine reference
        let spec = ModelSpec {
            eps: 2.0,
            f_modes: 4,
            ..Default::default()
        };
        let bath = build_bath(&spec).unwrap();
        let mut rng = trajectory_rng(9, 0);
        let pt = sample_bath(&bath, spec.beta, BathInit::Classical, &mut rng).unwrap();
        let u0 = crate::sampling::sample_bloch_uniform(&mut rng);
        let endpoint = |dt: f64, n: usize| {
            let traj = propagate(
                u0, &pt.q, &pt.p, dt, n, n, &spec, &bath, MappingKind::SpinW,
            )
            .unwrap();
            traj.last().unwrap().clone()
        };
        let reference = endpoint(0.0025, 800);
        let err = |s: &TrajectoryState| -> f64 {
            let mut e = 0.0f64;
            for i in 0..3 {
                e = e.max((s.u[i] - reference.u[i]).abs());
            }
            e
        };
        let e1 = err(&endpoint(0.04, 50));
        let e2 = err(&endpoint(0.02, 100));
        let ratio = e1 / e2;
        assert!(ratio > 10.0 && ratio < 24.0, "ratio {ratio}");
    }

    #[test]
    fn time_reversal() {
        let spec = ModelSpec {
            eps: 1.0,
            f_modes: 8,
            ..Default::default()
        };
        let bath = build_bath(&spec).unwrap();
        let mut rng = trajectory_rng(21, 4);
        let pt = sample_bath(&bath, spec.beta, BathInit::Classical, &mut rng).unwrap();
        let u0 = crate::sampling::sample_bloch_uniform(&mut rng);
        let fwd = propagate(
            u0, &pt.q, &pt.p, 0.01, 300, 300, &spec, &bath, MappingKind::SpinW,
        )
        .unwrap();
        let end = fwd.last().unwrap();
        // reverse momenta and the sense of spin precession (u_y -> -u_y)
        let u_rev = [end.u[0], -end.u[1], end.u[2]];
        let p_rev: Vec<f64> = end.p.iter().map(|p| -p).collect();
        let back = propagate(
            u_rev, &end.q, &p_rev, 0.01, 300, 300, &spec, &bath, MappingKind::SpinW,
        )
        .unwrap();
        let fin = back.last().unwrap();
        // reversal error is ~2x the RK4 global error of the forward leg
        for i in 0..3 {
            let expect = if i == 1 { -u0[i] } else { u0[i] };
            assert!((fin.u[i] - expect).abs() < 1e-6, "u[{i}]: {}", fin.u[i] - expect);
        }
        for a in 0..bath.n_modes() {
            assert!((fin.q[a] - pt.q[a]).abs() < 1e-6);
            assert!((fin.p[a] + pt.p[a]).abs() < 1e-6);
        }
    }

    #[test]
    fn blowup_detected() {
        let spec = ModelSpec {
            f_modes: 1,
            ..Default::default()
        };
        let bath = build_bath(&spec).unwrap();
        let res = propagate(
            [0.0, 0.0, 1.0],
            &[f64::INFINITY],
            &[0.0],
            0.01,
            10,
            1,
            &spec,
            &bath,
            MappingKind::SpinW,
        );
        assert!(matches!(res, Err(Error::TrajectoryBlowup { .. })));
    }
}
