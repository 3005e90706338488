use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use gridalign_bench::{benchmark_load, benchmark_schedule, benchmark_series};

fn bench_billing(c: &mut Criterion) {
    let schedule = benchmark_schedule();
    let load = benchmark_load(2023);
    c.bench_function("compute_bill_year", |b| {
        b.iter(|| gridalign::compute_bill(black_box(&schedule), black_box(&load)).unwrap())
    });
    c.bench_function("build_charge_function_year", |b| {
        b.iter(|| {
            gridalign::build_charge_function(black_box(&schedule), black_box(&load)).unwrap()
        })
    });
}

fn bench_reconcile(c: &mut Criterion) {
    let schedule = benchmark_schedule();
    c.bench_function("flatten_tariff_year", |b| {
        b.iter(|| gridalign::flatten_tariff(black_box(&schedule), 2023).unwrap())
    });
    let series = benchmark_series(2023);
    c.bench_function("month_hour_average_year", |b| {
        b.iter(|| gridalign::month_hour_average(black_box(&series)))
    });
}

fn bench_emissions(c: &mut Criterion) {
    let series = benchmark_series(2023);
    let generation: Vec<Option<f64>> = series.values.clone();
    let emissions: Vec<Option<f64>> = series
        .values
        .iter()
        .map(|v| v.map(|x| 0.5 * x + 100.0))
        .collect();
    let gen_emis =
        gridalign::emissions::GenEmisSeries::new("bench", series.start, generation, emissions)
            .unwrap();
    c.bench_function("estimate_mef_year", |b| {
        b.iter(|| gridalign::emissions::estimate_mef(black_box(&gen_emis)))
    });
}

fn bench_geo(c: &mut Criterion) {
    use gridalign::geo::{assign_region, GeoPoint, Region, RegionSet};
    // A 64-vertex ring approximating a circle, plus a square.
    let circle: Vec<(f64, f64)> = (0..=64)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * (i % 64) as f64 / 64.0;
            (-100.0 + 8.0 * theta.cos(), 40.0 + 8.0 * theta.sin())
        })
        .collect();
    let regions = RegionSet {
        regions: vec![
            Region {
                name: "CIRCLE".into(),
                rings: vec![circle],
            },
            Region {
                name: "SQUARE".into(),
                rings: vec![vec![
                    (-80.0, 30.0),
                    (-70.0, 30.0),
                    (-70.0, 42.0),
                    (-80.0, 42.0),
                    (-80.0, 30.0),
                ]],
            },
        ],
    };
    c.bench_function("assign_region_1k_points", |b| {
        b.iter(|| {
            for i in 0..1000 {
                let lat = 25.0 + (i % 100) as f64 * 0.25;
                let lon = -110.0 + (i % 160) as f64 * 0.3;
                black_box(assign_region(GeoPoint { lat, lon }, black_box(&regions)));
            }
        })
    });
}

criterion_group!(
    benches,
    bench_billing,
    bench_reconcile,
    bench_emissions,
    bench_geo
);
criterion_main!(benches);
