mod common;

use lrfact::diagnostics::subdiff_distance_psi;
use lrfact::harness::{gen_instance, ExperimentConfig};
use lrfact::sampling::OperatorKind;
use lrfact::solver::{initial_point, step, stopping_residuals, SolverState};
use lrfact::{solve, Exec, Model, ModelSpec, PenaltyParams, SolverConfig, Termination};

fn small(model: Model) -> (ModelSpec, lrfact::harness::Instance) {
    let base = if model == Model::L20 { ExperimentConfig::fig1() } else { ExperimentConfig::fig2() };
    let cfg = ExperimentConfig {
        m: 40,
        n: 30,
        r: 2,
        kappa: 6,
        sample_ratio: 0.6,
        c: if model == Model::L20 { 10.0 } else { 0.02 },
        ..base
    };
    let inst = gen_instance(&cfg).unwrap();
    (inst.spec(&cfg).unwrap(), inst)
}

#[test]
fn cached_residuals_match_recomputation() {
    for model in [Model::L20, Model::Dc] {
        let (spec, _) = small(model);
        let cfg = SolverConfig::default();
        let w0 = initial_point(&spec.op, &spec.b, 6).unwrap();
        let mut st = SolverState::initial(&spec, w0).unwrap();
        for _ in 0..60 {
            let out = step(&spec, &cfg, &st).unwrap();
            let fresh = stopping_residuals(&spec, &st, &out.state).unwrap();
            for (c, f) in [(out.residuals.u, fresh.u), (out.residuals.v, fresh.v)] {
                assert!((c - f).abs() <= 1e-12 * (1.0 + c.abs()), "{model}: {c} vs {f}");
            }
            st = out.state;
        }
    }
}

#[test]
fn objective_never_increases() {
    for model in [Model::L20, Model::Dc] {
        let (spec, _) = small(model);
        let cfg = SolverConfig {
            max_iters: 400,
            ..SolverConfig::default()
        };
        let res = solve(&spec, &cfg, None, 6).unwrap();
        let objs: Vec<f64> = res.trace.records.iter().map(|r| r.obj_scaled).collect();
        for pair in objs.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0), "{model}: {pair:?}");
        }
    }
}

#[test]
fn converged_l20_solution_is_nearly_stationary() {
    let (spec, inst) = small(Model::L20);
    let cfg = SolverConfig::default();
    let res = solve(&spec, &cfg, None, 6).unwrap();
    assert_eq!(res.termination, Termination::Converged);
    let bnorm = lrfact::dense::norm2(&spec.b);
    let d = subdiff_distance_psi(&spec, &res.w).unwrap();
    assert!(d <= 10.0 * cfg.epsilon * (1.0 + bnorm), "{d}");
    assert!(inst.relative_error(&res.w.product()) <= 1e-8);
    let (nu, nv) = res.w.column_counts(0.0);
    assert_eq!((nu, nv), (2, 2));
}

#[test]
fn zero_lambda_fits_the_data() {
    let cfg = ExperimentConfig {
        m: 12,
        n: 10,
        r: 2,
        kappa: 4,
        operator: OperatorKind::Full,
        ..ExperimentConfig::fig1()
    };
    let inst = gen_instance(&cfg).unwrap();
    let spec = ModelSpec::new(Model::L20, inst.op.clone(), inst.b.clone(), PenaltyParams::l20(0.0, 1e-3).unwrap()).unwrap();
    let res = solve(&spec, &SolverConfig::default(), None, 4).unwrap();
    assert_eq!(res.termination, Termination::Converged);
    assert!(inst.relative_error(&res.w.product()) <= 1e-8);
    assert!(res.trace.records.iter().all(|r| r.obj_paper.is_nan()));
}

#[test]
fn identical_inputs_give_identical_traces() {
    let (spec, _) = small(Model::Dc);
    let cfg = SolverConfig {
        max_iters: 150,
        ..SolverConfig::default()
    };
    let seq = ModelSpec::new(spec.model, spec.op.clone().with_exec(Exec::Sequential), spec.b.clone(), spec.params).unwrap();
    let runs = [solve(&spec, &cfg, None, 6).unwrap(), solve(&spec, &cfg, None, 6).unwrap(), solve(&seq, &cfg, None, 6).unwrap()];
    let key = |r: &lrfact::SolveResult| {
        r.trace
            .records
            .iter()
            .map(|x| (x.iter, x.obj_scaled.to_bits(), x.res_u.to_bits(), x.res_v.to_bits(), x.nnz_u, x.nnz_v))
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&runs[0]), key(&runs[1]));
    assert_eq!(key(&runs[0]), key(&runs[2]));
    assert_eq!(runs[0].w, runs[2].w);
}
