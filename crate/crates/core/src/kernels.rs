//! Auxiliary memory kernels and the Volterra equation of the second kind
//! for the full kernel.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::estimators::{assemble_c_ell, assemble_dc_direct, assemble_dc_ell, AuxCorrSet};
use crate::model::PauliMatrices;
use crate::tensor::{CorrTensor, Mat4};

/// How the auxiliary kernels are assembled from the correlators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRoute {
    /// Directly from the bath correlators; involves no numerical
    /// differentiation and no element of the direct correlation function.
    FromBathCorrelators,
    /// From C^L, dC^L and the direct derivative; kept for cross-validation.
    FromCl,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSet {
    pub k1: CorrTensor,
    pub k3: CorrTensor,
    pub k: CorrTensor,
    pub route: KernelRoute,
}

/// Assemble the auxiliary kernels K^(1), K^(3).
///
/// Bath-correlator route:
///   K^(1) = Z^(z) C^{V-,V} Y^(z) - Y^(z) C^{V+,V} Y^(z)
///   K^(3) = Z^(z) C^{V-} - Y^(z) C^{V+}
/// C^L route:
///   K^(1) = -dC^L + X dC + C^L X - X C X
///   K^(3) = -C^L + X C
pub fn build_aux_kernels(
    aux: &AuxCorrSet,
    mats: &PauliMatrices,
    route: KernelRoute,
) -> Result<(CorrTensor, CorrTensor), Error> {
    match route {
        KernelRoute::FromBathCorrelators => {
            aux.c_vm_v.check_grid(&aux.c_vp_v)?;
            aux.c_vm.check_grid(&aux.c_vp)?;
            let k1 = aux
                .c_vm_v
                .left_mul(&mats.z_z)
                .sub(&aux.c_vp_v.left_mul(&mats.y_z))
                .right_mul(&mats.y_z);
            let k3 = aux
                .c_vm
                .left_mul(&mats.z_z)
                .sub(&aux.c_vp.left_mul(&mats.y_z));
            Ok((k1, k3))
        }
        KernelRoute::FromCl => {
            let c_ell = assemble_c_ell(aux, mats)?;
            let dc = assemble_dc_direct(aux, mats)?;
            let dc_ell = assemble_dc_ell(aux, mats)?;
            let x = &mats.x_mat;
            let k1 = dc
                .left_mul(x)
                .sub(&dc_ell)
                .add(&c_ell.right_mul(x))
                .sub(&aux.c.left_mul(x).right_mul(x));
            let k3 = aux.c.left_mul(x).sub(&c_ell);
            Ok((k1, k3))
        }
    }
}

/// Kernels built with the direct derivative substituted for C^L everywhere.
/// Feeding these to the GQME must reproduce the direct correlation function
/// (the trivial closure), which serves as an end-to-end oracle.
pub fn build_aux_kernels_trivial_closure(
    aux: &AuxCorrSet,
    mats: &PauliMatrices,
) -> Result<(CorrTensor, CorrTensor), Error> {
    let dc = assemble_dc_direct(aux, mats)?;
    // d(dC)/dt: dc is an exact-sampled smooth curve (assembled from the
    // measured correlators, not finite-differenced), so the high-order
    // stencil is truncation- rather than noise-limited
    let ddc = dc.central_diff4();
    let x = &mats.x_mat;
    let k1 = dc
        .left_mul(x)
        .sub(&ddc)
        .add(&dc.right_mul(x))
        .sub(&aux.c.left_mul(x).right_mul(x));
    let k3 = aux.c.left_mul(x).sub(&dc);
    Ok((k1, k3))
}

/// Solve K(t) = K^(1)(t) + int_0^t K^(3)(tau) K(t - tau) dtau by trapezoidal
/// forward stepping.  If |K^(3)(0)| is not negligible the per-step 4x4 linear
/// system is solved instead of the explicit update.
pub fn volterra_solve(k1: &CorrTensor, k3: &CorrTensor) -> Result<CorrTensor, Error> {
    k1.check_grid(k3)?;
    let n = k1.len();
    let dt = k1.dt;
    let mut k = CorrTensor::zeros(n, dt);
    if n == 0 {
        return Ok(k);
    }
    k.frames[0] = k1.frames[0];

    let k3_zero = k3.frames[0];
    let implicit = k3_zero.max_abs() * dt * 0.5 > 1e-12;
    // lhs = I - dt/2 K3(0), constant across steps
    let lhs = Mat4::identity().sub(&k3_zero.scale(0.5 * dt));

    for it in 1..n {
        // trapezoid over known terms: j = 1 .. it-1 full weight, j = it half
        let mut conv = k3.frames[it].matmul(&k.frames[0]).scale(0.5);
        for j in 1..it {
            conv = conv.add(&k3.frames[j].matmul(&k.frames[it - j]));
        }
        let rhs = k1.frames[it].add(&conv.scale(dt));
        k.frames[it] = if implicit {
            solve4(&lhs, &rhs)?
        } else {
            // explicit: the j = 0 term K3(0) K(it) is dropped (K3(0) ~ 0)
            rhs
        };
        if !k.frames[it].0.iter().all(|v| v.is_finite()) {
            return Err(Error::Instability {
                stage: "volterra".into(),
                detail: format!("non-finite kernel at step {it}"),
            });
        }
    }
    Ok(k)
}

/// Solve A X = B for 4x4 matrices by Gaussian elimination with partial
/// pivoting, column by column of B.
pub(crate) fn solve4(a: &Mat4, b: &Mat4) -> Result<Mat4, Error> {
    let mut aug = [[0.0f64; 8]; 4];
    for i in 0..4 {
        for j in 0..4 {
            aug[i][j] = a.get(i, j);
            aug[i][4 + j] = b.get(i, j);
        }
    }
    for col in 0..4 {
        let (piv, pmax) = (col..4)
            .map(|r| (r, aug[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pmax < 1e-14 {
            return Err(Error::Instability {
                stage: "volterra".into(),
                detail: "singular per-step system".into(),
            });
        }
        aug.swap(col, piv);
        let d = aug[col][col];
        for j in col..8 {
            aug[col][j] /= d;
        }
        for r in 0..4 {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for j in col..8 {
                        aug[r][j] -= f * aug[col][j];
                    }
                }
            }
        }
    }
    let mut out = Mat4::ZERO;
    for i in 0..4 {
        for j in 0..4 {
            out.set(i, j, aug[i][4 + j]);
        }
    }
    Ok(out)
}

/// Residual of the identity K^(1)(t) = dK^(3)/dt - K^(3)(t) X, with the
/// derivative taken by central differences.  Diagnostic only.
pub fn k1_k3_residual(
    k1: &CorrTensor,
    k3: &CorrTensor,
    mats: &PauliMatrices,
) -> Result<CorrTensor, Error> {
    k1.check_grid(k3)?;
    let dk3 = k3.central_diff();
    Ok(k1.sub(&dk3.sub(&k3.right_mul(&mats.x_mat))))
}

/// Build the full kernel set from an ensemble's correlators.
pub fn build_kernel_set(
    aux: &AuxCorrSet,
    mats: &PauliMatrices,
    route: KernelRoute,
) -> Result<KernelSet, Error> {
    let (k1, k3) = build_aux_kernels(aux, mats, route)?;
    let k = volterra_solve(&k1, &k3)?;
    Ok(KernelSet { k1, k3, k, route })
}
