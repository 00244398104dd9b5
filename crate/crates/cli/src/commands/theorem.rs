//! `theorem`: run the synthetic bias/variance suite and print one
//! pass/fail line per property. Fails the process when an applicable
//! property fails; the variance-reduction premise requires rho > 0.

use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::theorem_lab::{
    check_bias_envelope, check_estimator_variance, check_proof_identity, variance_comparison,
    SyntheticSpec,
};

pub fn run(config: &RunConfig) -> CmdResult {
    let t = &config.theorem;
    if t.n < 1000 {
        return Err(CmdError::Usage(format!(
            "theorem_n = {} is too small for stable Monte Carlo; use at least 1000",
            t.n
        )));
    }
    let out = &config.output_dir;
    store::ensure_dir(out)?;
    let mut failed = false;

    // 1. input-variance reduction (premise: rho > 0)
    if t.rho > 0.0 {
        let spec = SyntheticSpec::sinusoid(t.n, t.amplitude, t.period, t.rho, t.sigma, config.seed);
        let (var_y, var_delta) = variance_comparison(&spec)?;
        let ok = var_delta < var_y;
        failed |= !ok;
        println!(
            "[{}] variance-reduction: Var(dy) {:.4} < Var(y) {:.4}",
            if ok { "PASS" } else { "FAIL" },
            var_delta,
            var_y
        );
    } else {
        println!("[SKIP] variance-reduction: not applicable (premise rho > 0 unmet, rho = {})", t.rho);
    }

    // 2. estimator variance across repetitions
    let base = SyntheticSpec::sinusoid(t.n, t.amplitude, t.period, t.rho, t.sigma, config.seed);
    let est = check_estimator_variance(&base, t.learner, t.repetitions, t.seeds_per_rep)?;
    failed |= !est.holds_90pct;
    println!(
        "[{}] estimator-variance: difference task lower in {}/{} repetitions",
        if est.holds_90pct { "PASS" } else { "FAIL" },
        est.wins,
        est.repetitions
    );
    let mut w = csv::Writer::from_path(out.join("bias_var_report.csv"))?;
    w.write_record([
        "repetition",
        "var_y",
        "var_delta",
        "estimator_var_y",
        "estimator_var_delta",
        "bias_y",
        "bias_delta",
        "n_seeds",
    ])?;
    for (i, r) in est.reports.iter().enumerate() {
        w.write_record(&[
            i.to_string(),
            r.var_y.to_string(),
            r.var_delta.to_string(),
            r.estimator_var_y.to_string(),
            r.estimator_var_delta.to_string(),
            r.bias_y.to_string(),
            r.bias_delta.to_string(),
            r.n_seeds.to_string(),
        ])?;
    }
    w.flush()?;

    // 3. proof identity Var(delta eps) = 2 sigma^2 (1 - rho) on a flat trend
    let identity_n = t.n.max(100_000);
    let identity = check_proof_identity(t.rho, t.sigma, identity_n, config.seed)?;
    failed |= !identity.holds_3se;
    println!(
        "[{}] proof-identity: sample {:.5} vs theory {:.5} (3se = {:.5})",
        if identity.holds_3se { "PASS" } else { "FAIL" },
        identity.sample_var_delta,
        identity.theory,
        3.0 * identity.standard_error
    );

    // 4. bias envelope over the slope sweep
    let envelope = check_bias_envelope(
        &t.sweep_l,
        1.0,
        t.sweep_n,
        t.rho,
        t.sigma,
        config.seed,
        t.sweep_seeds,
    )?;
    let ok = envelope.monotone && envelope.envelope_holds;
    failed |= !ok;
    println!(
        "[{}] bias-envelope: monotone={} at-most-linear={} fitted slope {:.3}",
        if ok { "PASS" } else { "FAIL" },
        envelope.monotone,
        envelope.envelope_holds,
        envelope.fitted_slope
    );
    let mut sw = csv::Writer::from_path(out.join("bias_sweep.csv"))?;
    sw.write_record(["L", "bias_gap", "var_ratio"])?;
    for row in &envelope.rows {
        sw.write_record(&[
            row.slope_bound.to_string(),
            row.bias_gap.to_string(),
            row.var_ratio.to_string(),
        ])?;
    }
    sw.flush()?;

    if failed {
        return Err(CmdError::Runtime("one or more theorem properties failed".into()));
    }
    Ok(())
}
