use gp_sinkhorn::divergence::{entropic_w2_squared, GaussianParams, RegParam};
use gp_sinkhorn::oracle::{
    compare_closed_form, discretize_gaussian_1d, entropic_cost, sinkhorn_knopp, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};

#[test]
fn oracle_agrees_with_closed_form() {
    for (v0, v1) in [(1.0, 1.0), (1.0, 4.0), (2.0, 3.0)] {
        for eps in [0.5, 1.0, 2.0, 5.0] {
            let c = compare_closed_form(
                (0.0, v0),
                (0.0, v1),
                eps,
                401,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )
            .unwrap();
            assert!(c.relative_gap < 0.02, "{c:?}");
        }
    }
}

#[test]
fn oracle_handles_shifted_means() {
    let c = compare_closed_form(
        (1.5, 1.0),
        (-0.5, 2.0),
        1.0,
        401,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )
    .unwrap();
    assert!(c.relative_gap < 0.02, "{c:?}");
}

#[test]
fn plan_marginals_and_cost_are_consistent() {
    let a = discretize_gaussian_1d(0.0, 1.0, -8.0, 8.0, 161).unwrap();
    let b = discretize_gaussian_1d(0.0, 2.0, -8.0, 8.0, 161).unwrap();
    let plan = sinkhorn_knopp(&a, &b, 2.0, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(plan.row_residual <= DEFAULT_TOL);
    assert!(plan.col_residual <= 1e-12);
    assert!(plan.matrix.iter().all(|&p| p >= 0.0));
    let cost = entropic_cost(&plan, &a, &b, 2.0);
    let closed = entropic_w2_squared(
        &GaussianParams::univariate(0.0, 1.0).unwrap(),
        &GaussianParams::univariate(0.0, 2.0).unwrap(),
        RegParam::new(2.0).unwrap(),
    )
    .unwrap()
    .value;
    assert!(((cost - closed) / closed).abs() < 1e-3, "{cost} {closed}");
}
