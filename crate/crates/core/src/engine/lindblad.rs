//! Deterministic ensemble average: `ρ̇ = -i[H, ρ] + D[L]ρ`, integrated with RK4.

use super::trajectory::stride;
use super::workspace::{add_scaled, Workspace};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I};

/// Trace drift beyond which the step is considered unstable.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct LindbladRecord {
    pub times: Vec<f64>,
    pub observables: Vec<Vec<f64>>,
    pub overlaps: Vec<Vec<f64>>,
    pub time_average: Option<CMatrix>,
    pub snapshots: Vec<(f64, CMatrix)>,
    pub final_state: CMatrix,
    pub max_trace_drift: f64,
}

/// Generator for diagonal `L`: the dissipator damps `ρ_ij` by `(l_i - l_j)²/2`.
pub struct DiagonalLindblad {
    h: CMatrix,
    damping: CMatrix,
}

impl DiagonalLindblad {
    pub fn new(h: &CMatrix, l_diag: &[f64]) -> Self {
        let d = l_diag.len();
        let damping = CMatrix::from_fn(d, d, |i, j| C64::from(-0.5 * (l_diag[i] - l_diag[j]).powi(2)));
        DiagonalLindblad {
            h: h.clone(),
            damping,
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let hr = &self.h * rho;
        let comm = &hr - hr.adjoint();
        let mut out = -comm * I;
        out.zip_zip_apply(rho, &self.damping, |o, r, g| *o += r * g);
        out
    }

    pub fn rk4_step(&self, rho: &CMatrix, dt: f64) -> CMatrix {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(rho + k1.scale(dt / 2.0)));
        let k3 = self.apply(&(rho + k2.scale(dt / 2.0)));
        let k4 = self.apply(&(rho + k3.scale(dt)));
        rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)
    }
}

/// Integrates the Lindblad equation from `rho0` (working-space coordinates)
/// to `t_final`, sampling every `sample_every`.
pub fn evolve_lindblad(
    ws: &Workspace,
    rho0: &CMatrix,
    dt: f64,
    t_final: f64,
    sample_every: f64,
    average_fraction: Option<f64>,
    snapshot_times: &[f64],
) -> Result<LindbladRecord> {
    if rho0.nrows() != ws.dim() {
        return Err(Error::structural("initial density matrix outside the working space"));
    }
    let gen = DiagonalLindblad::new(&ws.hamiltonian, &ws.l_diag);
    let steps = (t_final / dt).round() as usize;
    let every = stride(sample_every, dt)?;
    let avg_start = average_fraction.map(|f| t_final * (1.0 - f) - 1e-9 * t_final);
    let snapshot_steps: Vec<usize> = snapshot_times.iter().map(|t| (t / dt).round() as usize).collect();
    let tr0 = rho0.trace().re;

    let mut rho = rho0.clone();
    let mut rec = LindbladRecord {
        times: Vec::with_capacity(steps / every + 1),
        observables: Vec::new(),
        overlaps: Vec::new(),
        time_average: None,
        snapshots: Vec::new(),
        final_state: CMatrix::zeros(0, 0),
        max_trace_drift: 0.0,
    };
    let mut average = avg_start.map(|_| (CMatrix::zeros(ws.dim(), ws.dim()), 0usize));
    for step in 0..=steps {
        let t = step as f64 * dt;
        if step % every == 0 {
            let drift = (rho.trace().re - tr0).abs();
            rec.max_trace_drift = rec.max_trace_drift.max(drift);
            if drift > TRACE_DRIFT_LIMIT {
                return Err(Error::StepSize {
                    time: t,
                    reason: format!("Lindblad trace drifted by {drift:.3e}"),
                });
            }
            rec.times.push(t);
            rec.observables.push(ws.magnetizations(&ws.populations_density(&rho)));
            rec.overlaps.push(ws.overlaps_density(&rho));
            if let (Some((acc, count)), Some(start)) = (average.as_mut(), avg_start) {
                if t >= start {
                    add_scaled(acc, &rho, 1.0);
                    *count += 1;
                }
            }
        }
        if snapshot_steps.contains(&step) {
            rec.snapshots.push((t, rho.clone()));
        }
        if step == steps {
            break;
        }
        rho = gen.rk4_step(&rho, dt);
        rho = (&rho + rho.adjoint()).scale(0.5);
    }
    rec.time_average = average.and_then(|(acc, n)| (n > 0).then(|| acc.unscale(n as f64)));
    rec.final_state = rho;
    Ok(rec)
}
