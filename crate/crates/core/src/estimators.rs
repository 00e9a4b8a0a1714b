//! Trajectory-ensemble estimators for the direct correlation function and
//! every auxiliary correlator needed by the kernel construction.
//!
//! All six tensors are accumulated in a single pass over the ensemble: the
//! initial weights differ only by scalar factors of the starting phase point,
//! and the time-t factors reuse the same propagated state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::Error;
use crate::model::{BathSpec, MappingKind, ModelSpec, PauliMatrices};
use crate::sampling::{
    focused_initial_states, sample_bath, sample_bloch_uniform, trajectory_rng, BathInit,
};
use crate::tensor::CorrTensor;

/// Which Pauli rows to accumulate.  `Identity` restricts the ensemble to the
/// mu = I row, enough for population dynamics and much cheaper for Ehrenfest
/// (2 instead of 8 focused propagations per bath sample).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSelection {
    All,
    Identity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleOpts {
    pub n_traj: u64,
    pub dt: f64,
    pub t_max: f64,
    /// Snapshots are recorded every `stride` integrator steps.
    pub stride: usize,
    pub seed: u64,
    pub bath_init: BathInit,
    pub rows: RowSelection,
    /// Number of batch-means blocks for error estimation.
    pub n_blocks: usize,
}

impl EnsembleOpts {
    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn n_times(&self) -> usize {
        self.n_steps() / self.stride + 1
    }

    pub fn dt_out(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n_traj < 1 {
            return Err(Error::Config("n_traj must be >= 1".into()));
        }
        if !(self.dt > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::Config("dt and t_max must be > 0".into()));
        }
        if self.stride < 1 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if self.n_steps() % self.stride != 0 {
            return Err(Error::Config(format!(
                "number of steps {} is not a multiple of stride {}",
                self.n_steps(),
                self.stride
            )));
        }
        if self.n_blocks < 2 {
            return Err(Error::Config("n_blocks must be >= 2".into()));
        }
        Ok(())
    }
}

/// The bundle of correlator tensors one ensemble produces.
///
/// `c` is the direct correlation function; `c_vp`/`c_vm` carry the
/// anticommutator/commutator bath factor at t = 0; `c_vp_v`/`c_vm_v`
/// additionally carry the coupling coordinate at time t; `c_v_t` carries the
/// time-t coupling coordinate only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuxCorrSet {
    pub c: CorrTensor,
    pub c_vp: CorrTensor,
    pub c_vm: CorrTensor,
    pub c_vp_v: CorrTensor,
    pub c_vm_v: CorrTensor,
    pub c_v_t: CorrTensor,
    /// Batch-means standard errors, same layout as the tensors above.
    pub stderr: Vec<CorrTensor>,
    pub n_traj: u64,
    pub aborted: u64,
}

impl AuxCorrSet {
    pub fn tensors(&self) -> [&CorrTensor; 6] {
        [
            &self.c,
            &self.c_vp,
            &self.c_vm,
            &self.c_vp_v,
            &self.c_vm_v,
            &self.c_v_t,
        ]
    }

    /// Largest standard error over all tensors and grid points.
    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().fold(0.0f64, |m, t| m.max(t.max_abs()))
    }
}

const N_TENSORS: usize = 6;

/// Flat per-block accumulator: six tensors of nt*16 entries plus counters.
struct BlockAcc {
    sums: Vec<f64>,
    n_ok: u64,
    aborted: u64,
}

impl BlockAcc {
    fn new(nt: usize) -> BlockAcc {
        BlockAcc {
            sums: vec![0.0; N_TENSORS * nt * 16],
            n_ok: 0,
            aborted: 0,
        }
    }
}

struct EnsembleCtx<'a> {
    spec: &'a ModelSpec,
    bath: &'a BathSpec,
    kind: MappingKind,
    opts: &'a EnsembleOpts,
    nt: usize,
}

impl EnsembleCtx<'_> {
    /// Propagate one initial condition and scatter the six weighted
    /// contributions into the block accumulator.
    ///
    /// `w` are the four initial row weights; `v0` is the initial coupling
    /// coordinate; `pm0` is (beta/2) sum_a c_a p_a / m_a at t = 0.
    #[allow(clippy::too_many_arguments)]
    fn accumulate_trajectory(
        &self,
        prop: &mut Propagator,
        state: &mut [f64],
        w: &[f64; 4],
        v0: f64,
        pm0: f64,
        rows: &[usize],
        acc: &mut BlockAcc,
    ) -> Result<(), Error> {
        let nt = self.nt;
        let r = self.kind.radius();
        let dt = self.opts.dt;
        let stride = self.opts.stride;
        let n_steps = self.opts.n_steps();
        let stride16 = nt * 16;

        let record = |it: usize, s: &[f64], vt: f64, acc: &mut BlockAcc| {
            let sig = [1.0, r * s[0], r * s[1], r * s[2]];
            for &mu in rows {
                let wm = w[mu];
                let wvp = wm * v0;
                let wvm = wm * pm0;
                for nu in 0..4 {
                    let sv = sig[nu];
                    let base = it * 16 + mu * 4 + nu;
                    acc.sums[base] += wm * sv;
                    acc.sums[stride16 + base] += wvp * sv;
                    acc.sums[2 * stride16 + base] += wvm * sv;
                    acc.sums[3 * stride16 + base] += wvp * sv * vt;
                    acc.sums[4 * stride16 + base] += wvm * sv * vt;
                    acc.sums[5 * stride16 + base] += wm * sv * vt;
                }
            }
        };

        let v_init = prop.coupling_coordinate(state);
        record(0, state, v_init, acc);
        let mut it = 1;
        for step in 1..=n_steps {
            prop.step(state, dt);
            if step % stride == 0 {
                if !state[..3].iter().all(|v| v.is_finite()) {
                    return Err(Error::TrajectoryBlowup { index: 0, step });
                }
                let vt = prop.coupling_coordinate(state);
                record(it, state, vt, acc);
                it += 1;
            }
        }
        debug_assert_eq!(it, nt);
        Ok(())
    }

    fn run_block(&self, idx_start: u64, idx_end: u64) -> BlockAcc {
        let nt = self.nt;
        let mut acc = BlockAcc::new(nt);
        let mut prop = Propagator::new(self.spec, self.bath, self.kind);
        let f = self.bath.n_modes();
        let mut state = vec![0.0; 3 + 2 * f];
        let rows: Vec<usize> = match self.opts.rows {
            RowSelection::All => vec![0, 1, 2, 3],
            RowSelection::Identity => vec![0],
        };
        let beta = self.spec.beta;

        for idx in idx_start..idx_end {
            let mut rng = trajectory_rng(self.opts.seed, idx);
            let pt = sample_bath(self.bath, beta, self.opts.bath_init, &mut rng)
                .expect("beta validated");
            let v0: f64 = self.bath.c.iter().zip(&pt.q).map(|(c, q)| c * q).sum();
            let pm0: f64 = 0.5
                * beta
                * self
                    .bath
                    .c
                    .iter()
                    .zip(&pt.p)
                    .zip(&self.bath.m)
                    .map(|((c, p), m)| c * p / m)
                    .sum::<f64>();

            let result = match self.kind {
                MappingKind::SpinW => {
                    let u0 = sample_bloch_uniform(&mut rng);
                    let r = self.kind.radius();
                    let w = [1.0, r * u0[0], r * u0[1], r * u0[2]];
                    state[..3].copy_from_slice(&u0);
                    state[3..3 + f].copy_from_slice(&pt.q);
                    state[3 + f..].copy_from_slice(&pt.p);
                    self.accumulate_trajectory(&mut prop, &mut state, &w, v0, pm0, &rows, &mut acc)
                }
                MappingKind::Ehrenfest => {
                    // same bath sample for every focused state of every row
                    let mut res = Ok(());
                    'rows: for &mu in &rows {
                        for fs in focused_initial_states(mu) {
                            let mut w = [0.0; 4];
                            w[mu] = fs.weight;
                            state[..3].copy_from_slice(&fs.u0);
                            state[3..3 + f].copy_from_slice(&pt.q);
                            state[3 + f..].copy_from_slice(&pt.p);
                            res = self.accumulate_trajectory(
                                &mut prop, &mut state, &w, v0, pm0, &[mu], &mut acc,
                            );
                            if res.is_err() {
                                break 'rows;
                            }
                        }
                    }
                    res
                }
            };
            match result {
                Ok(()) => acc.n_ok += 1,
                Err(_) => acc.aborted += 1,
            }
        }
        acc
    }
}

/// Run a trajectory ensemble and return all correlator tensors.
///
/// Results are deterministic for a fixed seed regardless of worker count:
/// trajectory indices are partitioned into blocks, each block is summed
/// sequentially, and blocks are reduced in fixed order.
pub fn run_ensemble(
    spec: &ModelSpec,
    bath: &BathSpec,
    kind: MappingKind,
    opts: &EnsembleOpts,
) -> Result<AuxCorrSet, Error> {
    spec.validate()?;
    opts.validate()?;
    let nt = opts.n_times();
    let ctx = EnsembleCtx {
        spec,
        bath,
        kind,
        opts,
        nt,
    };

    let n_blocks = (opts.n_blocks as u64).min(opts.n_traj) as usize;
    let per = opts.n_traj / n_blocks as u64;
    let rem = opts.n_traj % n_blocks as u64;
    let ranges: Vec<(u64, u64)> = (0..n_blocks as u64)
        .map(|b| {
            let start = b * per + b.min(rem);
            let extra = if b < rem { 1 } else { 0 };
            (start, start + per + extra)
        })
        .collect();

    let blocks: Vec<BlockAcc> = ranges
        .par_iter()
        .map(|&(s, e)| ctx.run_block(s, e))
        .collect();

    // fixed-order reduction
    let mut total = BlockAcc::new(nt);
    for b in &blocks {
        for (t, v) in total.sums.iter_mut().zip(&b.sums) {
            *t += v;
        }
        total.n_ok += b.n_ok;
        total.aborted += b.aborted;
    }
    if total.n_ok == 0 {
        return Err(Error::Instability {
            stage: "ensemble".into(),
            detail: "all trajectories aborted".into(),
        });
    }

    let dt_out = opts.dt_out();
    let stride16 = nt * 16;
    let inv_n = 1.0 / total.n_ok as f64;
    let mut tensors: Vec<CorrTensor> = (0..N_TENSORS)
        .map(|k| {
            let mut t = CorrTensor::zeros(nt, dt_out);
            for it in 0..nt {
                for i in 0..16 {
                    t.frames[it].0[i] = total.sums[k * stride16 + it * 16 + i] * inv_n;
                }
            }
            t
        })
        .collect();

    // batch-means standard errors over the blocks
    let nb = blocks.iter().filter(|b| b.n_ok > 0).count();
    let mut stderr: Vec<CorrTensor> = (0..N_TENSORS)
        .map(|_| CorrTensor::zeros(nt, dt_out))
        .collect();
    if nb >= 2 {
        for k in 0..N_TENSORS {
            for it in 0..nt {
                for i in 0..16 {
                    let mean = tensors[k].frames[it].0[i];
                    let mut var = 0.0;
                    for b in blocks.iter().filter(|b| b.n_ok > 0) {
                        let bm = b.sums[k * stride16 + it * 16 + i] / b.n_ok as f64;
                        var += (bm - mean) * (bm - mean);
                    }
                    stderr[k].frames[it].0[i] = (var / (nb as f64 * (nb as f64 - 1.0))).sqrt();
                }
            }
        }
    }

    let c_v_t = tensors.pop().unwrap();
    let c_vm_v = tensors.pop().unwrap();
    let c_vp_v = tensors.pop().unwrap();
    let c_vm = tensors.pop().unwrap();
    let c_vp = tensors.pop().unwrap();
    let c = tensors.pop().unwrap();

    Ok(AuxCorrSet {
        c,
        c_vp,
        c_vm,
        c_vp_v,
        c_vm_v,
        c_v_t,
        stderr,
        n_traj: total.n_ok,
        aborted: total.aborted,
    })
}

/// C^L(t) = X C(t) + Y^(z) C^{V+}(t) - Z^(z) C^{V-}(t).
pub fn assemble_c_ell(aux: &AuxCorrSet, mats: &PauliMatrices) -> Result<CorrTensor, Error> {
    aux.c.check_grid(&aux.c_vp)?;
    aux.c.check_grid(&aux.c_vm)?;
    Ok(aux
        .c
        .left_mul(&mats.x_mat)
        .add(&aux.c_vp.left_mul(&mats.y_z))
        .sub(&aux.c_vm.left_mul(&mats.z_z)))
}

/// Direct time derivative without finite differences:
/// dC/dt = C(t) X + C^{V@t}(t) Y^(z).
pub fn assemble_dc_direct(aux: &AuxCorrSet, mats: &PauliMatrices) -> Result<CorrTensor, Error> {
    aux.c.check_grid(&aux.c_v_t)?;
    Ok(aux
        .c
        .right_mul(&mats.x_mat)
        .add(&aux.c_v_t.right_mul(&mats.y_z)))
}

/// Time derivative of C^L:
/// dC^L/dt = X dC/dt + Y^(z) (C^{V+} X + C^{V+,V} Y^(z))
///           - Z^(z) (C^{V-} X + C^{V-,V} Y^(z)).
pub fn assemble_dc_ell(aux: &AuxCorrSet, mats: &PauliMatrices) -> Result<CorrTensor, Error> {
    let dc = assemble_dc_direct(aux, mats)?;
    aux.c.check_grid(&aux.c_vp_v)?;
    aux.c.check_grid(&aux.c_vm_v)?;
    let plus = aux
        .c_vp
        .right_mul(&mats.x_mat)
        .add(&aux.c_vp_v.right_mul(&mats.y_z))
        .left_mul(&mats.y_z);
    let minus = aux
        .c_vm
        .right_mul(&mats.x_mat)
        .add(&aux.c_vm_v.right_mul(&mats.y_z))
        .left_mul(&mats.z_z);
    Ok(dc.left_mul(&mats.x_mat).add(&plus).sub(&minus))
}
