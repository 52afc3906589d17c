use geolmk::geodesic::{
    decode_landmarks, fuse_maps, geodesic_map, quantize_masked, BinWidth, GeodesicMap,
    GeodesicOptions, QuantizedGeodesicMap, BACKGROUND_CLASS, MAX_CLASS,
};
use geolmk::phantom::{generate, PhantomSpec};
use geolmk::postprocess::{component_count, largest_component};
use geolmk::seqlmk::{decode_sequence, extract_boundary_sequence};
use geolmk::{BinaryMask, Connectivity, LandmarkName, LandmarkSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fused_map(m: &BinaryMask, lm: &LandmarkSet) -> GeodesicMap {
    let opts = GeodesicOptions::default();
    let maps: Vec<GeodesicMap> = LandmarkName::SPARSE
        .iter()
        .filter_map(|&n| lm.get(n).filter(|l| l.present))
        .map(|l| geodesic_map(m, l, &opts).unwrap().map)
        .collect();
    fuse_maps(&maps.iter().collect::<Vec<_>>()).unwrap()
}

fn quantized(m: &BinaryMask, lm: &LandmarkSet) -> QuantizedGeodesicMap {
    quantize_masked(&fused_map(m, lm), m, BinWidth::Auto).unwrap()
}

fn assert_exact(decoded: &LandmarkSet, truth: &LandmarkSet) {
    for name in LandmarkName::SPARSE {
        let t = truth.get(name).unwrap();
        let d = decoded.get(name).unwrap();
        assert_eq!(d.present, t.present, "{name}");
        if t.present {
            assert_eq!(d.voxel, t.voxel, "{name}");
        }
    }
}

#[test]
fn sparse_roundtrip_is_exact() {
    let (m, lm) = generate(&PhantomSpec::default()).unwrap();
    let q = quantized(&m, &lm);
    let decoded = decode_landmarks(&q, &m, &LandmarkName::SPARSE).unwrap();
    assert_exact(&decoded, &lm);
    // The unquantized map decodes to the same voxels.
    let raw = decode_landmarks(&fused_map(&m, &lm), &m, &LandmarkName::SPARSE).unwrap();
    assert_exact(&raw, &lm);
}

#[test]
fn missing_condyle_is_reported_absent() {
    let spec = PhantomSpec {
        missing_left_condyle: true,
        ..PhantomSpec::default()
    };
    let (m, lm) = generate(&spec).unwrap();
    let decoded = decode_landmarks(&quantized(&m, &lm), &m, &LandmarkName::SPARSE).unwrap();
    assert_exact(&decoded, &lm);
    assert!(!decoded.get(LandmarkName::CdL).unwrap().present);
}

#[test]
fn upward_corruption_moves_landmarks_at_most_one_voxel() {
    let (m, lm) = generate(&PhantomSpec::default()).unwrap();
    let clean = quantized(&m, &lm);
    let fg: Vec<usize> = m.foreground().collect();
    for seed in 0..5 {
        let mut q = clean.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = q.classes.data_mut();
        for _ in 0..fg.len() / 100 {
            let i = fg[rng.random_range(0..fg.len())];
            let c = data[i];
            assert_ne!(c, BACKGROUND_CLASS);
            if c < MAX_CLASS {
                data[i] = rng.random_range(c + 1..=MAX_CLASS);
            }
        }
        let decoded = decode_landmarks(&q, &m, &LandmarkName::SPARSE).unwrap();
        for name in LandmarkName::SPARSE {
            let t = lm.voxel(name).unwrap();
            let d = decoded.voxel(name).unwrap();
            let err = (0..3).map(|a| t[a].abs_diff(d[a])).max().unwrap();
            assert!(err <= 1, "seed {seed} {name}: {t:?} vs {d:?}");
        }
    }
}

#[test]
fn two_part_mandible_keeps_larger_piece() {
    let spec = PhantomSpec {
        split_into_two_parts: true,
        ..PhantomSpec::default()
    };
    let (m, lm) = generate(&spec).unwrap();
    assert_eq!(component_count(&m, Connectivity::TwentySix), 2);
    let kept = largest_component(&m, Connectivity::TwentySix);
    assert!(kept.count() * 2 > m.count());
    // The severed piece carries the right ramus.
    assert!(kept.contains(lm.voxel(LandmarkName::Me).unwrap()));
    assert!(kept.contains(lm.voxel(LandmarkName::CdL).unwrap()));
    assert!(!kept.contains(lm.voxel(LandmarkName::CdR).unwrap()));
}

#[test]
fn close_landmarks_roundtrip_within_two_voxels() {
    let (m, lm) = generate(&PhantomSpec::default()).unwrap();
    let seq = extract_boundary_sequence(&m, &lm).unwrap();
    assert_eq!(seq.flagged_rows().len(), 5);
    let decoded = decode_sequence(&seq).unwrap();
    assert!(decoded.absent.is_empty());
    for d in &decoded.landmarks {
        let t = lm.voxel(d.name).unwrap();
        let v = d.voxel.unwrap();
        assert_eq!(v[0], t[0]);
        assert!(
            v[1].abs_diff(t[1]) <= 2 && v[2].abs_diff(t[2]) <= 2,
            "{}: {t:?} vs {v:?}",
            d.name
        );
    }
}
