//! The `verify` invariant suite.

use std::fmt;

use nsedit_core::editor::{concat_keys, recall_drift};
use nsedit_core::metrics::preservation_drift;
use nsedit_core::projection::numerical_rank;
use nsedit_core::{
    edit_objective, solve_update, spectral_decompose, AssociativeMemory, CovarianceAccumulator, Matrix,
    ProjectionMatrix, StrategyKind,
};

use crate::config::ExperimentConfig;
use crate::run::{generate, run_one, RunError};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.threshold
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:e} <= threshold {:e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed())
    }
}

/// Runs the dynamic strategy on the config's first seed and checks the editing invariants.
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport, RunError> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    let stream = generate(cfg, seed)?;
    let run = run_one(cfg, &stream, seed, StrategyKind::Dynamic)?;
    let traj = &run.trajectory;
    let d0 = cfg.stream.d0;
    let num = |e| RunError::Numerical {
        strategy: "dynamic",
        seed,
        step: 0,
        source: e,
    };

    let mut report = VerifyReport::default();
    let mut idempotence = 0.0f64;
    let mut symmetry = 0.0f64;
    let mut annihilation = 0.0f64;
    for state in traj {
        let p = &state.projection.mat;
        let p2 = p.matmul(p).map_err(num)?;
        idempotence = idempotence.max(p2.max_abs_diff(p));
        symmetry = symmetry.max(p.max_abs_diff(&p.transpose()));
        let decomp = spectral_decompose(&state.accumulator).map_err(num)?;
        let lambda_max = decomp.eigenvalues.first().copied().unwrap_or(0.0);
        let cp = state.accumulator.cov.matmul(p).map_err(num)?;
        annihilation = annihilation.max(cp.max_abs() / lambda_max.max(1.0));

        let energetic = state.projection.nullity.saturating_sub(d0 - numerical_rank(&decomp, 1e-12));
        if energetic > 0 {
            report.warnings.push(format!(
                "step {}: projector nullity {} (trace {:.6}) includes {energetic} directions that carry key energy; \
                 rel_tol {} is too loose to protect absorbed keys",
                state.step,
                state.projection.nullity,
                p.trace(),
                cfg.rel_tol
            ));
        }
    }
    report.checks.push(Check {
        name: "projector_idempotence",
        measured: idempotence,
        threshold: 1e-8,
    });
    report.checks.push(Check {
        name: "projector_symmetry",
        measured: symmetry,
        threshold: 1e-10,
    });
    report.checks.push(Check {
        name: "projector_annihilation",
        measured: annihilation,
        threshold: 10.0 * cfg.rel_tol,
    });

    let w0 = &traj[0].memory;
    let mut drift = 0.0f64;
    let mut prior = 0.0f64;
    for t in 1..traj.len() {
        drift = drift.max(preservation_drift(&traj[t].memory, &stream.preservation, w0).map_err(num)?);
        if t >= 2 {
            let keys = concat_keys(d0, stream.batches[..t - 1].iter().map(|b| &b.keys)).map_err(num)?;
            prior = prior.max(recall_drift(&traj[t - 1].memory, &traj[t].memory, &keys).map_err(num)?);
        }
    }
    report.checks.push(Check {
        name: "preservation_drift",
        measured: drift,
        threshold: 1e-6,
    });
    report.checks.push(Check {
        name: "prior_edit_recall_drift",
        measured: prior,
        threshold: 1e-6,
    });

    let all = concat_keys(
        d0,
        std::iter::once(&stream.preservation.keys0).chain(stream.batches.iter().map(|b| &b.keys)),
    )
    .map_err(num)?;
    let direct = CovarianceAccumulator::from_keys(&all).map_err(num)?;
    report.checks.push(Check {
        name: "covariance_recursion",
        measured: direct.cov.max_abs_diff(&traj[traj.len() - 1].accumulator.cov),
        threshold: 1e-10,
    });

    if let Some(batch) = stream.batches.first() {
        let mem = &traj[0].memory;
        let proj = &traj[0].projection;
        let closed = solve_update(mem, &batch.keys, &batch.values, proj).map_err(num)?.delta;
        let iterative = conjugate_gradient(mem, &batch.keys, &batch.values, proj).map_err(num)?;
        let a = edit_objective(mem, &batch.keys, &batch.values, proj, &closed).map_err(num)?;
        let b = edit_objective(mem, &batch.keys, &batch.values, proj, &iterative).map_err(num)?;
        report.checks.push(Check {
            name: "closed_form_vs_iterative",
            measured: (a - b).abs() / b.abs().max(f64::MIN_POSITIVE),
            threshold: 1e-6,
        });
    }
    Ok(report)
}

/// Minimizes the edit objective by conjugate gradients on its normal equations
/// `X·(P + P K Kᵀ P) = (V − W K) Kᵀ P`, one row of `X` at a time.
pub fn conjugate_gradient(
    mem: &AssociativeMemory,
    keys: &Matrix,
    values: &Matrix,
    proj: &ProjectionMatrix,
) -> nsedit_core::Result<Matrix> {
    let p = &proj.mat;
    let pk = p.matmul(keys)?;
    let mut a = pk.matmul(&pk.transpose())?.add(p)?;
    a.symmetrize();
    let resid = values.sub(&mem.recall_batch(keys)?)?;
    let b = resid.matmul(&pk.transpose())?;

    let n = a.rows();
    let mut out = Matrix::zeros(b.rows(), n);
    for row in 0..b.rows() {
        let rhs = b.row(row).to_vec();
        let rhs_norm = nsedit_core::matrix::norm(&rhs);
        let mut x = vec![0.0; n];
        let mut r = rhs.clone();
        let mut d = r.clone();
        let mut rr = nsedit_core::matrix::dot(&r, &r);
        for _ in 0..(4 * n).max(16) {
            if rr.sqrt() <= 1e-14 * rhs_norm || rr == 0.0 {
                break;
            }
            let ad = a.matvec(&d)?;
            let alpha = rr / nsedit_core::matrix::dot(&d, &ad);
            for i in 0..n {
                x[i] += alpha * d[i];
                r[i] -= alpha * ad[i];
            }
            let rr_new = nsedit_core::matrix::dot(&r, &r);
            let beta = rr_new / rr;
            for i in 0..n {
                d[i] = r[i] + beta * d[i];
            }
            rr = rr_new;
        }
        for (j, v) in x.into_iter().enumerate() {
            out[(row, j)] = v;
        }
    }
    Ok(out)
}
