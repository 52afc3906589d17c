use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geolmk::geodesic::{
    decode_landmarks, fuse_maps, geodesic_map, quantize_masked, BinWidth, GeodesicMap,
    GeodesicOptions,
};
use geolmk::phantom::{generate, PhantomSpec};
use geolmk::postprocess::{fill_holes, largest_component};
use geolmk::{edt, BinaryMask, Connectivity, Dims, LandmarkName, LandmarkSet, Spacing};
use std::hint::black_box;

fn phantom(n: usize) -> (BinaryMask, LandmarkSet) {
    generate(&PhantomSpec::scaled(Dims::cube(n), Spacing::UNIT)).unwrap()
}

fn sparse_maps(m: &BinaryMask, lm: &LandmarkSet) -> Vec<GeodesicMap> {
    let opts = GeodesicOptions::default();
    LandmarkName::SPARSE
        .iter()
        .filter_map(|&n| lm.get(n).filter(|l| l.present))
        .map(|l| geodesic_map(m, l, &opts).unwrap().map)
        .collect()
}

fn bench_edt(c: &mut Criterion) {
    let mut g = c.benchmark_group("edt");
    for n in [64, 96, 128] {
        let (m, _) = phantom(n);
        g.bench_with_input(BenchmarkId::new("ltdt", n), &m, |b, m| {
            b.iter(|| edt::ltdt(black_box(m)))
        });
        g.bench_with_input(BenchmarkId::new("sltdt", n), &m, |b, m| {
            b.iter(|| edt::sltdt(black_box(m)))
        });
    }
    g.finish();
}

fn bench_geodesic(c: &mut Criterion) {
    let mut g = c.benchmark_group("geodesic");
    g.sample_size(10);
    let (m, lm) = phantom(96);
    let me = lm.get(LandmarkName::Me).unwrap().clone();
    for conn in [Connectivity::Six, Connectivity::TwentySix] {
        let opts = GeodesicOptions {
            connectivity: conn,
            ..GeodesicOptions::default()
        };
        g.bench_function(BenchmarkId::new("single_map", conn.count()), |b| {
            b.iter(|| geodesic_map(black_box(&m), &me, &opts).unwrap())
        });
    }
    g.finish();
}

fn bench_fuse_decode(c: &mut Criterion) {
    let (m, lm) = phantom(96);
    let maps = sparse_maps(&m, &lm);
    let refs: Vec<&GeodesicMap> = maps.iter().collect();
    let fused = fuse_maps(&refs).unwrap();
    let q = quantize_masked(&fused, &m, BinWidth::Auto).unwrap();
    let mut g = c.benchmark_group("fuse");
    g.bench_function("fuse_5", |b| {
        b.iter(|| fuse_maps(black_box(&refs)).unwrap())
    });
    g.bench_function("quantize", |b| {
        b.iter(|| quantize_masked(black_box(&fused), &m, BinWidth::Auto).unwrap())
    });
    g.bench_function("decode", |b| {
        b.iter(|| decode_landmarks(black_box(&q), &m, &LandmarkName::SPARSE).unwrap())
    });
    g.finish();
}

fn bench_postprocess(c: &mut Criterion) {
    let spec = PhantomSpec {
        cavity_count: 3,
        noise_blob_count: 4,
        ..PhantomSpec::default()
    };
    let (m, _) = generate(&spec).unwrap();
    let mut g = c.benchmark_group("postprocess");
    g.bench_function("largest_component", |b| {
        b.iter(|| largest_component(black_box(&m), Connectivity::TwentySix))
    });
    g.bench_function("fill_holes", |b| b.iter(|| fill_holes(black_box(&m))));
    g.finish();
}

criterion_group!(
    benches,
    bench_edt,
    bench_geodesic,
    bench_fuse_decode,
    bench_postprocess
);
criterion_main!(benches);
