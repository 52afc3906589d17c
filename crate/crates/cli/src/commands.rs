use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use geolmk::geodesic::{
    decode_landmarks as decode, fuse_maps, geodesic_map, quantize as quantize_all, quantize_masked,
    BinWidth, GeodesicMap, GeodesicOptions, MapSource, QuantizedGeodesicMap,
};
use geolmk::io::{self, AnyVolume};
use geolmk::metrics::{self, CaseReport};
use geolmk::phantom::PhantomSpec;
use geolmk::{edt, netspec, postprocess, seqlmk};
use geolmk::{Connectivity, Error, LandmarkName, Spacing};
use rayon::prelude::*;

use crate::{
    emit, Arch, DecodeLandmarksArgs, DecodeSeqArgs, EvalLandmarksArgs, EvalSegArgs, ExtractSeqArgs,
    FuseArgs, GeodesicArgs, NetspecArgs, PcaAugmentArgs, PhantomArgs, PostprocessArgs,
    QuantizeArgs, TransformArgs,
};

/// Bad command-line input that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn names(list: &[String]) -> anyhow::Result<Vec<LandmarkName>> {
    Ok(list
        .iter()
        .map(|s| s.trim().parse())
        .collect::<Result<Vec<_>, Error>>()?)
}

fn map_path(dir: &Path, name: LandmarkName) -> PathBuf {
    dir.join(format!("{name}.gvol"))
}

pub fn phantom(a: PhantomArgs) -> anyhow::Result<()> {
    let spec: PhantomSpec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Json {
                context: format!("phantom spec {}", p.display()),
                source: e,
            })?
        }
        None => PhantomSpec::default(),
    };
    let (mask, landmarks) = geolmk::phantom::generate(&spec)?;
    io::write_mask(&mask, &a.output)?;
    io::write_landmarks_json(&landmarks, &a.landmarks)?;
    if let Some(p) = &a.labeled_volume {
        let v = io::write_landmarks_labeled_volume(&landmarks, mask.dims(), mask.spacing())?;
        io::write_volume(&v, p)?;
    }
    log::info!("phantom: {} foreground voxels", mask.count());
    Ok(())
}

pub fn transform(a: TransformArgs, signed: bool) -> anyhow::Result<()> {
    let mask = io::read_mask(&a.mask)?;
    let field = if signed {
        edt::sltdt(&mask)
    } else {
        edt::ltdt(&mask)
    };
    io::write_volume(&field, &a.output)?;
    Ok(())
}

pub fn geodesic(a: GeodesicArgs) -> anyhow::Result<()> {
    let mask = io::read_mask(&a.mask)?;
    let landmarks = io::read_landmarks_json(&a.landmarks)?;
    landmarks.validate(mask.dims())?;
    let opts = GeodesicOptions {
        connectivity: Connectivity::from_count(a.connectivity)?,
        snap_limit_mm: a.snap_limit,
    };
    let targets: Vec<LandmarkName> = if a.names.is_empty() {
        LandmarkName::SPARSE
            .into_iter()
            .filter(|&n| landmarks.voxel(n).is_some())
            .collect()
    } else {
        names(&a.names)?
    };
    if targets.is_empty() {
        return Err(Error::MissingLandmark("any sparse landmark".into()).into());
    }
    let wanted = targets
        .iter()
        .map(|&n| {
            landmarks
                .get(n)
                .filter(|l| l.present)
                .ok_or_else(|| Error::MissingLandmark(n.to_string()))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    wanted
        .par_iter()
        .map(|l| -> Result<(), Error> {
            let out = geodesic_map(&mask, l, &opts)?;
            if let Some(s) = out.snap {
                log::info!("{}: snapped {:?} -> {:?}", l.name, s.from, s.to);
            }
            io::write_volume(&out.map.field, &map_path(&a.out_dir, l.name))
        })
        .collect::<Result<(), Error>>()?;
    Ok(())
}

fn read_map(path: &Path) -> anyhow::Result<GeodesicMap> {
    let v = io::read_volume(path)?;
    match v {
        AnyVolume::F64(field) => Ok(GeodesicMap {
            field,
            source: MapSource::Fused,
        }),
        other => Err(Error::InvalidArgument {
            field: "map".into(),
            message: format!(
                "{} has dtype {}, expected f64",
                path.display(),
                other.dtype().name()
            ),
        }
        .into()),
    }
}

pub fn fuse(a: FuseArgs) -> anyhow::Result<()> {
    let maps = a
        .maps
        .iter()
        .map(|p| read_map(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let fused = fuse_maps(&maps.iter().collect::<Vec<_>>())?;
    io::write_volume(&fused.field, &a.output)?;
    Ok(())
}

pub fn quantize(a: QuantizeArgs) -> anyhow::Result<()> {
    let map = read_map(&a.map)?;
    let sbin = match a.sbin {
        Some(w) => BinWidth::Fixed(w),
        None => BinWidth::Auto,
    };
    let q = match &a.mask {
        Some(p) => quantize_masked(&map, &io::read_mask(p)?, sbin)?,
        None => quantize_all(&map, sbin)?,
    };
    io::write_volume(&q.classes, &a.output)?;
    println!("{}", serde_json::json!({ "bin_width_mm": q.bin_width }));
    Ok(())
}

pub fn decode_landmarks(a: DecodeLandmarksArgs) -> anyhow::Result<()> {
    let mask = io::read_mask(&a.mask)?;
    let expected = if a.names.is_empty() {
        LandmarkName::SPARSE.to_vec()
    } else {
        names(&a.names)?
    };
    let set = match io::read_volume(&a.map)? {
        AnyVolume::U8(classes) => {
            let q = QuantizedGeodesicMap {
                classes,
                bin_width: 1.0,
            };
            decode(&q, &mask, &expected)?
        }
        AnyVolume::F64(field) => {
            let g = GeodesicMap {
                field,
                source: MapSource::Fused,
            };
            decode(&g, &mask, &expected)?
        }
        other => {
            return Err(Error::InvalidArgument {
                field: "map".into(),
                message: format!("dtype {} is neither u8 nor f64", other.dtype().name()),
            }
            .into())
        }
    };
    emit(&io::landmarks_to_json(&set), a.output.as_deref())
}

pub fn extract_seq(a: ExtractSeqArgs) -> anyhow::Result<()> {
    let mask = io::read_mask(&a.mask)?;
    let landmarks = io::read_landmarks_json(&a.landmarks)?;
    landmarks.validate(mask.dims())?;
    let seq = seqlmk::extract_boundary_sequence(&mask, &landmarks)?;
    emit(&io::sequence_to_json(&seq), a.output.as_deref())
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    Ok(fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?)
}

pub fn decode_seq(a: DecodeSeqArgs) -> anyhow::Result<()> {
    let seq = io::sequence_from_json(&read_text(&a.seq)?)?;
    let decoded = seqlmk::decode_sequence(&seq)?;
    if let Some(p) = &a.landmarks {
        if seq.crop.is_none() {
            return Err(UsageError(
                "--landmarks needs a sequence with a crop window to map rows back to voxels".into(),
            )
            .into());
        }
        io::write_landmarks_json(&decoded.to_landmark_set()?, p)?;
    }
    emit(&io::report_json(&decoded), a.output.as_deref())
}

pub fn pca_augment(a: PcaAugmentArgs) -> anyhow::Result<()> {
    let training = io::sequences_from_json(&read_text(&a.training)?)?;
    let out = seqlmk::pca_augment(&training, a.count, a.sigma_cap, a.seed)?;
    emit(&io::report_json(&out), a.output.as_deref())
}

pub fn postprocess(a: PostprocessArgs) -> anyhow::Result<()> {
    if !a.largest_cc && !a.fill {
        log::warn!("neither --largest-cc nor --fill given; copying the mask unchanged");
    }
    let connectivity = Connectivity::from_count(a.connectivity)?;
    let mut mask = io::read_mask(&a.mask)?;
    if a.largest_cc {
        mask = postprocess::largest_component(&mask, connectivity);
    }
    if a.fill {
        mask = postprocess::fill_holes(&mask);
    }
    io::write_mask(&mask, &a.output)?;
    Ok(())
}

fn print_report(report: &CaseReport, json: bool, csv: Option<&Path>) -> anyhow::Result<()> {
    if let Some(p) = csv {
        fs::write(p, io::report_csv(std::slice::from_ref(report)))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    if json {
        println!("{}", io::report_json(report));
        return Ok(());
    }
    if let Some(s) = &report.seg {
        println!("dsc          {:.6}", s.dsc);
        println!("iou          {:.6}", s.iou);
        println!("sensitivity  {:.6}", s.sensitivity);
        println!("specificity  {:.6}", s.specificity);
        println!("hd_mm        {:.6}", s.hd_mm);
    }
    if let Some(l) = &report.landmarks {
        println!(
            "{:<6} {:>10} {:>10} {:>6}",
            "name", "mm", "voxels", "in_box"
        );
        for e in &l.entries {
            println!(
                "{:<6} {:>10.4} {:>10.4} {:>6}",
                e.name.as_str(),
                e.mm_error,
                e.pixel_error,
                e.in_box
            );
        }
        for n in &l.false_positives {
            println!("{n}: predicted but absent in ground truth");
        }
        for n in &l.false_negatives {
            println!("{n}: present in ground truth but not predicted");
        }
        println!("detection rate {:.4}", l.detection_rate());
    }
    Ok(())
}

pub fn eval_seg(a: EvalSegArgs) -> anyhow::Result<()> {
    let pred = io::read_mask(&a.pred)?;
    let gt = io::read_mask(&a.gt)?;
    let report = CaseReport {
        case_id: a.case_id,
        seg: Some(metrics::seg_scores_at(&pred, &gt, a.percentile)?),
        landmarks: None,
    };
    print_report(&report, a.json, a.csv.as_deref())
}

pub fn eval_landmarks(a: EvalLandmarksArgs) -> anyhow::Result<()> {
    let pred = io::read_landmarks_json(&a.pred)?;
    let gt = io::read_landmarks_json(&a.gt)?;
    let spacing = match (&a.reference, a.spacing.as_slice()) {
        (Some(p), _) => io::read_header(p)?.spacing,
        (None, [sx, sy, sz]) => Spacing::new(*sx, *sy, *sz)?,
        (None, _) => Spacing::UNIT,
    };
    let report = CaseReport {
        case_id: a.case_id,
        seg: None,
        landmarks: Some(metrics::landmark_errors(&pred, &gt, spacing)?),
    };
    print_report(&report, a.json, a.csv.as_deref())
}

pub fn netspec(a: NetspecArgs) -> anyhow::Result<()> {
    let ledger = match a.arch {
        Arch::Tiramisu => netspec::tiramisu_ledger(a.growth_rate)?,
        Arch::Unet => netspec::unet_ledger(),
        Arch::Lstm => netspec::lstm_ledger(a.cells, a.units, a.row_width)?,
    };
    if a.json {
        println!("{}", ledger.to_json());
    } else {
        println!("{ledger}");
    }
    Ok(())
}
