use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use critwave::currents::{theta_com, theta_mom};
use critwave::currents::exact::dw_field;
use critwave::evolution::{Direction, EvolutionConfig, Evolver};
use critwave::foliation::build_foliation;
use critwave::modelops::{phg_fit, phg_iterate, solve_ball, BallGrid, FitConfig, PhgState};
use critwave::soliton::solve_ground_state;
use critwave::spectral::unstable_eigenpair;
use critwave::{ModeField, RadialGrid};

fn spectral(c: &mut Criterion) {
    let g = RadialGrid::finite(401, 40.0, 1.0).unwrap();
    c.bench_function("unstable_eigenpair_401", |b| b.iter(|| unstable_eigenpair(black_box(&g), 1e-6).unwrap()));
}

fn evolution(c: &mut Criterion) {
    let fol = build_foliation(10.0, 20.0, 2).unwrap();
    let mut ev = Evolver::new(&fol, EvolutionConfig::linear(400, 20.0, 0.05, &[(0, 0)])).unwrap();
    let g = ev.grid.clone();
    let phi = g.sample(|r| (-(r - 4.0f64).powi(2) / 4.0).exp(), 0.0);
    let mut st = ev.state_from_fields(&[ModeField::new(0, 0, phi, vec![0.0; g.len()], 0.0)]).unwrap();
    ev.make_consistent(&mut st, Direction::Forward).unwrap();
    // the first run assembles and factors the step operator
    ev.run(st.clone(), 0.05, Direction::Forward, |_| true).unwrap();
    c.bench_function("linear_evolution_20_steps", |b| {
        b.iter_batched(|| st.clone(), |s| ev.run(s, 1.0, Direction::Forward, |_| true).unwrap(), BatchSize::SmallInput)
    });
}

fn currents(c: &mut Criterion) {
    let g = RadialGrid::compactified(1600, 20.0).unwrap();
    let fol = build_foliation(10.0, 20.0, 2).unwrap();
    let f = [dw_field(&g, 0, 3.0)];
    c.bench_function("theta_mom_com_1600", |b| {
        b.iter(|| (theta_mom(black_box(&f), &g, &fol).unwrap(), theta_com(black_box(&f), &g, &fol).unwrap()))
    });
}

fn model_operators(c: &mut Criterion) {
    let grid = BallGrid::new(40).unwrap();
    c.bench_function("solve_ball_40", |b| b.iter(|| solve_ball(black_box(1.0), &grid, &|r| 1.0 / r, 0.0, 0).unwrap()));
    c.bench_function("phg_iterate_seed_3_3", |b| {
        b.iter(|| phg_iterate(&PhgState::seed(black_box(3.0), 3.0, 12.0), 10_000).unwrap())
    });
    let t: Vec<f64> = (0..80).map(|i| 2.0 * 100f64.powf(i as f64 / 79.0)).collect();
    let y: Vec<f64> = t.iter().map(|&t| 2.0 * t.powi(-3) + 0.5 * t.powi(-4) * t.ln() - 1.5 * t.powf(-5.5)).collect();
    let cfg = FitConfig::default();
    c.bench_function("phg_fit_three_terms", |b| b.iter(|| phg_fit(black_box(&t), &y, &cfg).unwrap()));
}

fn ground_state(c: &mut Criterion) {
    let g = RadialGrid::finite(401, 200.0, 1.5).unwrap();
    c.bench_function("ground_state_q9", |b| b.iter(|| solve_ground_state(black_box(9.0), &g, 1e-8).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = spectral, evolution, currents, model_operators, ground_state
}
criterion_main!(benches);
