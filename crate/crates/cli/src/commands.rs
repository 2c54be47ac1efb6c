use anyhow::{bail, Context};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use kusuoka::lyapunov::{hs_angle, lyap_matrix, oseledets_projection};
use kusuoka::orbits::{
    asymptotic_report, counting_tables, geometric_error_fit, line_scan, line_scan_min, orbit_records, rescale_counts,
    trace_powers, zeta_euler, zeta_rational, zeta_series,
};
use kusuoka::symbolic::DEFAULT_BUDGET;
use kusuoka::transfer::{
    perron, pressure_of, pressure_root, sample_kappa_many, variational_value, Competitor, SpectralResult,
};
use kusuoka::{BlockOperator, CylinderMeasure, IfsSpec, Potential, SymOperator};

use crate::config::RunConfig;
use crate::output::{Output, Table};

struct Setup {
    ifs: IfsSpec,
    v: Potential,
    block: BlockOperator,
}

fn setup(cfg: &RunConfig) -> anyhow::Result<Setup> {
    let ifs = cfg.build_ifs()?;
    let v = cfg.build_potential(&ifs)?;
    let block = BlockOperator::new(&ifs, cfg.q, &v)?;
    Ok(Setup { ifs, v, block })
}

fn spectral(cfg: &RunConfig, block: &BlockOperator) -> anyhow::Result<SpectralResult> {
    Ok(perron(block, cfg.solve.tol, cfg.solve.max_iter)?)
}

fn op_rows(op: &SymOperator) -> Vec<Vec<f64>> {
    let m = op.matrix();
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn describe(s: &Setup, cfg: &RunConfig) -> serde_json::Value {
    json!({
        "ifs": s.ifs.name(),
        "t": s.ifs.t(),
        "d": s.ifs.d(),
        "q": cfg.q,
        "potential": s.v.tag(),
        "memory": s.v.memory(),
    })
}

pub fn solve(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let r = spectral(cfg, &s.block)?;
    let mut states = Table::new("states", &["state", "kind", "i", "j", "value"]);
    for (kind, ops) in [("Q", &r.q), ("mu", &r.mu)] {
        for (u, op) in ops.iter().enumerate() {
            let m = op.matrix();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    states.push(vec![u.into(), kind.into(), i.into(), j.into(), m[(i, j)].into()]);
                }
            }
        }
    }
    let summary = json!({
        "setup": describe(&s, cfg),
        "beta": r.beta,
        "pressure": r.pressure(),
        "iterations": r.iterations,
        "adjoint_iterations": r.adjoint_iterations,
        "theta": r.theta,
        "residual_right": r.residual_right,
        "residual_left": r.residual_left,
        "cone_diameter": r.diameter,
        "Q": r.q.iter().map(op_rows).collect::<Vec<_>>(),
        "mu": r.mu.iter().map(op_rows).collect::<Vec<_>>(),
    });
    Ok(Output {
        command: "solve",
        summary,
        tables: vec![states],
    })
}

/// `π′` has stopped moving: every step beyond some `r₀ < P` adds at most
/// 1e-3 relative, and the geometric tail beyond `P` is below the same level.
fn pi_prime_settles(pi_prime: &[f64], a: &[f64], beta: f64) -> (bool, Option<usize>, f64) {
    let p = pi_prime.len();
    let last = pi_prime[p - 1];
    let mut r0 = None;
    for r in (1..p).rev() {
        if pi_prime[r] - pi_prime[r - 1] <= 1e-3 * last {
            r0 = Some(r);
        } else {
            break;
        }
    }
    let k = a.iter().enumerate().map(|(j, x)| x.abs() / beta.powi(j as i32 + 1)).fold(0.0, f64::max);
    let tail = if beta < 1.0 {
        k * beta.powi(p as i32 + 1) / ((p + 1) as f64 * (1.0 - beta))
    } else {
        f64::INFINITY
    };
    (beta < 1.0 && r0.is_some() && tail <= 1e-3 * last, r0.map(|r| r + 1), tail)
}

pub fn count(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let vhat = s.v.clone();
    let p = cfg.count.max_period;
    let zero = s.block.with_potential(Potential::zero(s.ifs.t()))?;
    let beta = spectral(cfg, &zero)?.beta;
    let root = pressure_root(&s.block, &vhat, 1e-13).context("count needs V̂ > 0 to define N(τ)")?;
    let c = root.c;
    if c == 0.0 {
        bail!("c = 0: the counting function π is not defined");
    }
    let exact_below = (c.abs() * (p + 1) as f64 * vhat.min()).exp();
    let grid = match &cfg.count.r_grid {
        Some(g) => g.geometric()?,
        None => crate::config::GridConfig {
            min: 1.0_f64.max(exact_below.powf(0.02)),
            max: exact_below * (1.0 - 1e-9),
            points: 200,
        }
        .geometric()?,
    };
    let tables = counting_tables(s.block.family(), &vhat, Some(c), p, &grid, DEFAULT_BUDGET)?;
    let report = asymptotic_report(&tables, beta, cfg.count.gamma_prime)?;
    let rescaled = rescale_counts(&tables, c)?;
    let fit = if beta > 1.0 { Some(geometric_error_fit(&tables, beta)?) } else { None };
    let a = trace_powers(&zero, p);
    let (pi_bounded, settles_from, tail) = pi_prime_settles(&tables.pi_prime, &a, beta);

    let mut periods = Table::new(
        "periods",
        &["r", "pi_prime", "eta", "r_pi_prime_over_beta_r", "r_pi_prime_bound", "pi_prime_over_beta_gamma", "eta_geometric"],
    );
    for row in &report.period_rows {
        periods.push(vec![
            row.r.into(),
            row.pi_prime.into(),
            row.eta.into(),
            row.r_pi_prime_over_beta_r.into(),
            row.r_pi_prime_bound.into(),
            row.pi_prime_over_beta_gamma.into(),
            row.eta_geometric.into(),
        ]);
    }
    let mut gridt = Table::new("grid", &["r", "pi", "S", "pi_log_r_over_r", "pi_bound", "S_over_r", "exact"]);
    for row in &report.grid_rows {
        gridt.push(vec![
            row.r.into(),
            row.pi.into(),
            row.s.into(),
            row.pi_log_r_over_r.into(),
            row.pi_bound.into(),
            row.s_over_r.into(),
            row.exact.into(),
        ]);
    }
    let mut rescaledt = Table::new("rescaled", &["r", "pi_hat", "pi_hat_log_r_over_r_abs_c", "exact"]);
    for row in &rescaled {
        rescaledt.push(vec![row.r.into(), row.pi_hat.into(), row.normalized.into(), row.exact.into()]);
    }

    let max_ratio = report
        .period_rows
        .iter()
        .filter(|r| r.r >= 10)
        .map(|r| r.r_pi_prime_over_beta_r)
        .fold(f64::NAN, f64::max);
    let gamma_seq: Vec<f64> = report.period_rows.iter().map(|r| r.pi_prime_over_beta_gamma).collect();
    let summary = json!({
        "setup": describe(&s, cfg),
        "beta": beta,
        "c": c,
        "pressure_at_c": root.pressure_at_c,
        "max_period": p,
        "orbit_count": tables.orbit_count,
        "exact_below": tables.exact_below,
        "pi_bounded": pi_bounded,
        "pi_prime_settles_from": settles_from,
        "pi_prime_tail_bound": tail,
        "max_r_pi_prime_over_beta_r_from_10": max_ratio,
        "r_pi_prime_bound": (beta > 1.0).then(|| beta / (beta - 1.0)),
        "pi_prime_over_beta_gamma_decreasing": gamma_seq.windows(2).all(|w| w[1] < w[0]),
        "gamma_prime": cfg.count.gamma_prime,
        "S_over_r_last": report.grid_rows.last().map(|r| r.s_over_r),
        "eta_fit": fit,
    });
    Ok(Output {
        command: "count",
        summary,
        tables: vec![periods, gridt, rescaledt],
    })
}

/// The real pole `1/β` located by bisection on the sign change of `det(I − xL)`.
fn locate_pole(block: &BlockOperator, beta: f64) -> Option<f64> {
    let d = |x: f64| zeta_rational(Complex64::new(x, 0.0), block).det().re;
    let (mut lo, mut hi) = (0.0, (1.0 + 1e-3) / beta);
    if d(hi) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn zeta(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let beta = spectral(cfg, &s.block)?.beta;
    let zc = &cfg.zeta;
    let a = trace_powers(&s.block, zc.n_terms.max(zc.max_period));
    let records = orbit_records(s.block.family(), &s.v, zc.max_period, DEFAULT_BUDGET)?;
    let points: Vec<Complex64> = match &zc.points {
        Some(p) => p.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
        None => (0..20)
            .map(|j| Complex64::from_polar(0.5 / beta, 2.0 * std::f64::consts::PI * j as f64 / 20.0))
            .collect(),
    };
    let mut table = Table::new(
        "values",
        &[
            "z_re", "z_im", "series_re", "series_im", "series_err", "euler_re", "euler_im", "euler_err", "rational_re",
            "rational_im", "near_pole", "max_diff",
        ],
    );
    let mut worst: f64 = 0.0;
    for z in points {
        let se = zeta_series(&a[..zc.n_terms], beta, z);
        let eu = zeta_euler(z, &records, &a[..zc.max_period], beta);
        let ra = zeta_rational(z, &s.block);
        let diff = if ra.near_pole {
            f64::NAN
        } else {
            (se.value() - ra.value()).norm().max((eu.value() - ra.value()).norm())
        };
        if diff.is_finite() {
            worst = worst.max(diff);
        }
        table.push(vec![
            z.re.into(),
            z.im.into(),
            se.re.into(),
            se.im.into(),
            se.error_bound.into(),
            eu.re.into(),
            eu.im.into(),
            eu.error_bound.into(),
            ra.re.into(),
            ra.im.into(),
            ra.near_pole.into(),
            diff.into(),
        ]);
    }
    let pole = locate_pole(&s.block, beta);
    let summary = json!({
        "setup": describe(&s, cfg),
        "beta": beta,
        "inverse_beta": 1.0 / beta,
        "pole": pole,
        "n_terms": zc.n_terms,
        "max_period": zc.max_period,
        "orbit_count": records.len(),
        "max_diff": worst,
    });
    Ok(Output {
        command: "zeta",
        summary,
        tables: vec![table],
    })
}

/// Five fixed Bernoulli weight vectors on `t` symbols, the first uniform.
pub fn default_competitors(t: usize) -> Vec<Vec<f64>> {
    (0..5)
        .map(|j| {
            let raw: Vec<f64> = (0..t).map(|i| 1.0 + (j * (i + 1) % (t + 2)) as f64).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn variational(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let sp = spectral(cfg, &s.block)?;
    let cm = CylinderMeasure::new(s.block.clone(), sp);
    let vc = &cfg.variational;
    let competitors = vc.competitors.clone().unwrap_or_else(|| default_competitors(s.ifs.t()));
    let mut table = Table::new(
        "competitors",
        &["name", "value", "stderr", "entropy", "energy", "matrix_term", "log_beta", "check"],
    );
    let kus = variational_value(&cm, &Competitor::Kusuoka, vc.samples, vc.depth, cfg.seed)?;
    let kus_ok = (kus.value - kus.log_beta).abs() <= 3.0 * kus.stderr;
    table.push(vec![
        "kusuoka".into(),
        kus.value.into(),
        kus.stderr.into(),
        kus.entropy.into(),
        kus.energy.into(),
        kus.matrix_term.into(),
        kus.log_beta.into(),
        kus_ok.into(),
    ]);
    let mut all_below = true;
    for (j, w) in competitors.iter().enumerate() {
        let r = variational_value(&cm, &Competitor::Bernoulli(w.clone()), vc.samples, vc.depth, cfg.seed.wrapping_add(j as u64 + 1))?;
        let ok = r.value <= r.log_beta + 3.0 * r.stderr;
        all_below &= ok;
        let name = format!(
            "bernoulli({})",
            w.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(";")
        );
        table.push(vec![
            name.into(),
            r.value.into(),
            r.stderr.into(),
            r.entropy.into(),
            r.energy.into(),
            r.matrix_term.into(),
            r.log_beta.into(),
            ok.into(),
        ]);
    }
    let summary = json!({
        "setup": describe(&s, cfg),
        "log_beta": kus.log_beta,
        "kusuoka": kus,
        "kusuoka_within_3_stderr": kus_ok,
        "competitors_below_bound": all_below,
        "samples": vc.samples,
        "depth": vc.depth,
        "seed": cfg.seed,
    });
    Ok(Output {
        command: "variational",
        summary,
        tables: vec![table],
    })
}

pub fn lyapunov(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let sp = spectral(cfg, &s.block)?;
    let cm = CylinderMeasure::new(s.block.clone(), sp);
    let lc = &cfg.lyapunov;
    if lc.l == 0 || lc.words == 0 {
        bail!("lyapunov needs l >= 1 and words >= 1");
    }
    let mu = cm.mu_total().scaled(1.0 / cm.mu_total().max_eigenvalue());
    let words = sample_kappa_many(&cm, lc.l, lc.words, cfg.seed)?;
    let mut ls: Vec<usize> = [lc.l / 8, lc.l / 4, lc.l / 2, lc.l].into_iter().filter(|&x| x > 0).collect();
    ls.dedup();
    let fam = s.block.family();
    let rows: Vec<Vec<(usize, f64, f64, f64, f64, f64, bool)>> = words
        .par_iter()
        .map(|w| {
            let w = w.symbols();
            ls.iter()
                .map(|&l| -> anyhow::Result<_> {
                    let e = lyap_matrix(fam, &mu, w, l)?;
                    let p = oseledets_projection(fam, &mu, w, l)?;
                    let m = cm.density_m(&w[..l])?;
                    let angle = hs_angle(&p.p, &m);
                    Ok((l, e.top, e.gap, p.idempotency_defect, angle, p.rank_indicator, e.gap < lc.gap_threshold))
                })
                .collect()
        })
        .collect::<anyhow::Result<_>>()?;
    let mut table = Table::new(
        "words",
        &["word", "l", "top", "gap", "idempotency_defect", "alignment", "rank_indicator", "skipped"],
    );
    let (mut max_defect, mut max_angle, mut skipped) = (0.0f64, 0.0f64, 0usize);
    for (i, per_l) in rows.iter().enumerate() {
        for &(l, top, gap, defect, angle, rank, skip) in per_l {
            table.push(vec![i.into(), l.into(), top.into(), gap.into(), defect.into(), angle.into(), rank.into(), skip.into()]);
            if l == lc.l {
                if skip {
                    skipped += 1;
                } else {
                    max_defect = max_defect.max(defect);
                    max_angle = max_angle.max(angle);
                }
            }
        }
    }
    let summary = json!({
        "setup": describe(&s, cfg),
        "l": lc.l,
        "words": lc.words,
        "seed": cfg.seed,
        "max_idempotency_defect": max_defect,
        "max_alignment": max_angle,
        "skipped_small_gap": skipped,
        "gap_threshold": lc.gap_threshold,
    });
    Ok(Output {
        command: "lyapunov",
        summary,
        tables: vec![table],
    })
}

pub fn root(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let r = pressure_root(&s.block, &s.v, cfg.root.tol)?;
    let n = cfg.root.grid_points.max(2);
    let half = r.c.abs() + 0.5;
    let mut table = Table::new("grid", &["c", "pressure"]);
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let c = r.c - half + 2.0 * half * j as f64 / (n - 1) as f64;
        let p = pressure_of(&s.block, &s.v.scaled(-c))?;
        values.push(p);
        table.push(vec![c.into(), p.into()]);
    }
    let summary = json!({
        "setup": describe(&s, cfg),
        "c": r.c,
        "pressure_at_c": r.pressure_at_c,
        "pressure_zero": r.pressure_zero,
        "evaluations": r.evaluations,
        "sign_matches": (r.c > 0.0) == (r.pressure_zero > 0.0),
        "strictly_decreasing": values.windows(2).all(|w| w[1] < w[0]),
    });
    Ok(Output {
        command: "root",
        summary,
        tables: vec![table],
    })
}

pub fn scanline(cfg: &RunConfig) -> anyhow::Result<Output> {
    let s = setup(cfg)?;
    let r = pressure_root(&s.block, &s.v, 1e-13)?;
    let block = s.block.with_potential(s.v.scaled(r.c.abs()))?;
    let ys = cfg.scanline.y.linear()?;
    let pts = line_scan(&block, &ys);
    let mut table = Table::new("line", &["y", "re", "im", "abs"]);
    for p in &pts {
        table.push(vec![p.y.into(), p.re.into(), p.im.into(), p.abs.into()]);
    }
    let min = line_scan_min(&pts, cfg.scanline.exclude);
    let at_one = line_scan(&block, &[0.0])[0];
    let summary = json!({
        "setup": describe(&s, cfg),
        "c": r.c,
        "c_positive": r.c > 0.0,
        "det_at_s1": at_one.abs,
        "exclude": cfg.scanline.exclude,
        "min_abs": min.map(|m| m.1),
        "y_at_min": min.map(|m| m.0),
    });
    Ok(Output {
        command: "scanline",
        summary,
        tables: vec![table],
    })
}
