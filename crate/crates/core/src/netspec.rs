//! Feature-map and parameter ledgers for the segmentation and landmarking
//! networks.
//!
//! Parameter conventions: convolutions carry a bias; batch normalization
//! counts two parameters per input feature and is applied inside dense layers
//! and transitions of the Tiramisu (the U-Net ledger counts convolutions
//! only). A dense layer is BN, ReLU and a 3x3 convolution producing `k` maps.
//! Transition down is BN and a 1x1 convolution to the same width; transition
//! up is a 3x3 transposed convolution over the `n_prev * k` maps of the
//! previous block.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIRAMISU_BLOCK_LAYERS: [u32; 11] = [4, 5, 7, 10, 12, 15, 12, 10, 7, 5, 4];
pub const TIRAMISU_STEM: u64 = 48;
/// Feature-map column of the published Tiramisu table, which matches a
/// growth rate of 16 (stem first, softmax last).
pub const TIRAMISU_PUBLISHED: [u64; 14] = [
    48, 112, 192, 304, 464, 656, 896, 1088, 816, 578, 384, 256, 2, 2,
];
pub const TIRAMISU_PUBLISHED_GROWTH: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Input,
    Conv,
    Deconv,
    MaxPool,
    DenseBlock,
    #[serde(rename = "dense_block+transition_down")]
    DenseBlockTransitionDown,
    #[serde(rename = "transition_up+dense_block")]
    TransitionUpDenseBlock,
    #[serde(rename = "upsample+copy")]
    UpsampleCopy,
    Softmax,
    LstmStack,
    Dense,
}

impl LayerKind {
    fn label(self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv => "conv",
            LayerKind::Deconv => "deconv",
            LayerKind::MaxPool => "max_pool",
            LayerKind::DenseBlock => "dense_block",
            LayerKind::DenseBlockTransitionDown => "dense_block+transition_down",
            LayerKind::TransitionUpDenseBlock => "transition_up+dense_block",
            LayerKind::UpsampleCopy => "upsample+copy",
            LayerKind::Softmax => "softmax",
            LayerKind::LstmStack => "lstm_stack",
            LayerKind::Dense => "dense",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub kind: LayerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<u32>,
    /// Layers inside a dense block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_rate: Option<u32>,
    pub in_features: u64,
    pub out_features: u64,
    /// Side length of the square feature map, where it applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial: Option<u32>,
    pub params: u64,
    /// Value printed in the published table, when one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub published: Option<u64>,
}

impl LayerEntry {
    fn new(kind: LayerKind, in_features: u64, out_features: u64, params: u64) -> Self {
        LayerEntry {
            kind,
            kernel: None,
            layers: None,
            growth_rate: None,
            in_features,
            out_features,
            spatial: None,
            params,
            published: None,
        }
    }

    fn kernel(mut self, k: u32) -> Self {
        self.kernel = Some(k);
        self
    }

    fn spatial(mut self, s: u32) -> Self {
        self.spatial = Some(s);
        self
    }

    fn block(mut self, layers: u32, k: u32) -> Self {
        self.layers = Some(layers);
        self.growth_rate = Some(k);
        self
    }
}

/// A computed value that disagrees with the published one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub entry: usize,
    pub computed: u64,
    pub published: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureLedger {
    pub name: String,
    pub entries: Vec<LayerEntry>,
    pub total_params: u64,
    pub discrepancies: Vec<Discrepancy>,
    /// Final output shape (rows, columns) for sequence models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_shape: Option<[u64; 2]>,
}

impl ArchitectureLedger {
    fn finish(name: &str, entries: Vec<LayerEntry>, output_shape: Option<[u64; 2]>) -> Self {
        let discrepancies = entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                let p = e.published?;
                (p != e.out_features).then_some(Discrepancy {
                    entry: i,
                    computed: e.out_features,
                    published: p,
                })
            })
            .collect();
        ArchitectureLedger {
            name: name.to_string(),
            total_params: entries.iter().map(|e| e.params).sum(),
            entries,
            discrepancies,
            output_shape,
        }
    }

    pub fn out_features(&self, kind: LayerKind) -> Vec<u64> {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.out_features)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

impl fmt::Display for ArchitectureLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<u32>| v.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let mut out = String::new();
        writeln!(out, "{}", self.name)?;
        writeln!(
            out,
            "{:<28} {:>6} {:>4} {:>4} {:>7} {:>7} {:>7} {:>10}  published",
            "layer", "kernel", "n", "k", "in", "out", "size", "params"
        )?;
        for e in &self.entries {
            let published = match e.published {
                Some(p) if p != e.out_features => format!("{p}  MISMATCH"),
                Some(p) => p.to_string(),
                None => String::new(),
            };
            writeln!(
                out,
                "{:<28} {:>6} {:>4} {:>4} {:>7} {:>7} {:>7} {:>10}  {}",
                e.kind.label(),
                opt(e.kernel),
                opt(e.layers),
                opt(e.growth_rate),
                e.in_features,
                e.out_features,
                opt(e.spatial),
                e.params,
                published
            )?;
        }
        writeln!(out, "total trainable parameters: {}", self.total_params)?;
        if let Some([r, c]) = self.output_shape {
            writeln!(out, "output shape: {r}x{c}")?;
        }
        for d in &self.discrepancies {
            writeln!(
                out,
                "discrepancy: entry {} computes {} features, published table lists {}",
                d.entry, d.computed, d.published
            )?;
        }
        f.write_str(out.trim_end())
    }
}

fn conv_params(kernel: u64, cin: u64, cout: u64) -> u64 {
    kernel * kernel * cin * cout + cout
}

fn dense_block_params(cin: u64, layers: u32, k: u64) -> u64 {
    (0..layers as u64)
        .map(|i| {
            let c = cin + i * k;
            2 * c + conv_params(3, c, k)
        })
        .sum()
}

pub fn tiramisu_ledger(k: u32) -> Result<ArchitectureLedger> {
    tiramisu_ledger_with(k, &TIRAMISU_BLOCK_LAYERS, TIRAMISU_STEM)
}

/// Tiramisu ledger with `block_layers` listing the down blocks, bottleneck
/// and up blocks in order.
pub fn tiramisu_ledger_with(k: u32, block_layers: &[u32], stem: u64) -> Result<ArchitectureLedger> {
    if k == 0 {
        return Err(Error::invalid("growth_rate", "must be at least 1"));
    }
    if block_layers.len() < 3 || block_layers.len() % 2 == 0 || block_layers.contains(&0) {
        return Err(Error::invalid(
            "block_layers",
            "need an odd count of at least 3 nonzero block sizes",
        ));
    }
    if stem == 0 {
        return Err(Error::invalid("stem_features", "must be at least 1"));
    }
    let kk = k as u64;
    let depth = block_layers.len() / 2;
    let mut entries = vec![
        LayerEntry::new(LayerKind::Input, 1, 1, 0),
        LayerEntry::new(LayerKind::Conv, 1, stem, conv_params(3, 1, stem)).kernel(3),
    ];
    let mut c = stem;
    let mut skips = Vec::with_capacity(depth);
    for &n in &block_layers[..depth] {
        let out = c + n as u64 * kk;
        let params = dense_block_params(c, n, kk) + 2 * out + conv_params(1, out, out);
        entries
            .push(LayerEntry::new(LayerKind::DenseBlockTransitionDown, c, out, params).block(n, k));
        skips.push(out);
        c = out;
    }
    let n = block_layers[depth];
    let out = c + n as u64 * kk;
    entries.push(
        LayerEntry::new(LayerKind::DenseBlock, c, out, dense_block_params(c, n, kk)).block(n, k),
    );
    let mut prev = n as u64;
    for (&n, &skip) in block_layers[depth + 1..].iter().zip(skips.iter().rev()) {
        let up = prev * kk;
        let cin = skip + up;
        let out = cin + n as u64 * kk;
        let params = conv_params(3, up, up) + dense_block_params(cin, n, kk);
        entries
            .push(LayerEntry::new(LayerKind::TransitionUpDenseBlock, up, out, params).block(n, k));
        prev = n as u64;
        c = out;
    }
    entries.push(LayerEntry::new(LayerKind::Conv, c, 2, conv_params(1, c, 2)).kernel(1));
    entries.push(LayerEntry::new(LayerKind::Softmax, 2, 2, 0));

    let published = k == TIRAMISU_PUBLISHED_GROWTH
        && block_layers == TIRAMISU_BLOCK_LAYERS
        && stem == TIRAMISU_STEM;
    if published {
        for (e, &p) in entries[1..].iter_mut().zip(&TIRAMISU_PUBLISHED) {
            e.published = Some(p);
        }
    }
    Ok(ArchitectureLedger::finish(
        &format!("tiramisu (k={k})"),
        entries,
        None,
    ))
}

/// Three-level U-Net with 5x5 kernels used for sparse landmark maps.
pub fn unet_ledger() -> ArchitectureLedger {
    use LayerKind::*;
    let conv = |kind, cin, cout, size| {
        LayerEntry::new(kind, cin, cout, conv_params(5, cin, cout))
            .kernel(5)
            .spatial(size)
    };
    let plain = |kind, cin, cout, size| LayerEntry::new(kind, cin, cout, 0).spatial(size);
    let rows: [(u64, u64, u64); 16] = [
        (1, 1, 256),
        (1, 32, 256),
        (32, 32, 256),
        (32, 32, 128),
        (32, 64, 128),
        (64, 64, 128),
        (64, 64, 64),
        (64, 128, 64),
        (128, 64, 64),
        (64, 128, 128),
        (128, 64, 128),
        (64, 32, 128),
        (32, 64, 256),
        (64, 32, 256),
        (32, 32, 256),
        (32, 21, 256),
    ];
    let kinds = [
        Input,
        Conv,
        Conv,
        MaxPool,
        Conv,
        Conv,
        MaxPool,
        Conv,
        Deconv,
        UpsampleCopy,
        Deconv,
        Deconv,
        UpsampleCopy,
        Deconv,
        Deconv,
        Deconv,
    ];
    let mut entries: Vec<LayerEntry> = kinds
        .iter()
        .zip(rows)
        .map(|(&kind, (cin, cout, size))| match kind {
            Conv | Deconv => conv(kind, cin, cout, size as u32),
            _ => plain(kind, cin, cout, size as u32),
        })
        .collect();
    entries.push(plain(Softmax, 21, 21, 256));
    ArchitectureLedger::finish("unet", entries, None)
}

pub fn lstm_ledger(cells: u32, units: u32, row_width: u32) -> Result<ArchitectureLedger> {
    for (field, v) in [("cells", cells), ("units", units), ("row_width", row_width)] {
        if v == 0 {
            return Err(Error::invalid(field, "must be at least 1"));
        }
    }
    let (n, u, w) = (cells as u64, units as u64, row_width as u64);
    let mut stack = LayerEntry::new(LayerKind::LstmStack, w, u, 4 * ((w + u) * u + u));
    stack.layers = Some(cells);
    let entries = vec![
        LayerEntry::new(LayerKind::Input, w, w, 0),
        stack,
        LayerEntry::new(LayerKind::Dense, u, 2, u * 2 + 2),
        LayerEntry::new(LayerKind::Softmax, 2, 2, 0),
    ];
    Ok(ArchitectureLedger::finish("lstm", entries, Some([n, 2])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiramisu_published_feature_counts() {
        let l = tiramisu_ledger(16).unwrap();
        assert_eq!(
            l.out_features(LayerKind::DenseBlockTransitionDown),
            vec![112, 192, 304, 464, 656]
        );
        assert_eq!(l.out_features(LayerKind::DenseBlock), vec![896]);
        assert_eq!(
            l.out_features(LayerKind::TransitionUpDenseBlock),
            vec![1088, 816, 576, 384, 256]
        );
        assert_eq!(l.discrepancies.len(), 1);
        let d = &l.discrepancies[0];
        assert_eq!((d.computed, d.published), (576, 578));
        assert_eq!(l.entries[d.entry].kind, LayerKind::TransitionUpDenseBlock);
        assert!(l.to_string().contains("MISMATCH"));
    }

    #[test]
    fn tiramisu_rule_invariants() {
        for k in [12, 16, 24, 32] {
            let l = tiramisu_ledger(k).unwrap();
            for e in &l.entries {
                if let (Some(n), Some(g)) = (e.layers, e.growth_rate) {
                    let added = n as u64 * g as u64;
                    if e.kind == LayerKind::TransitionUpDenseBlock {
                        assert!(e.out_features > e.in_features + added);
                    } else {
                        assert_eq!(e.out_features, e.in_features + added);
                    }
                }
            }
            assert!(l.discrepancies.is_empty() || k == 16);
        }
    }

    #[test]
    fn tiramisu_params_near_nine_million() {
        let p = tiramisu_ledger(16).unwrap().total_params;
        assert_eq!(p, 9_318_914);
        assert!((p as f64 - 9e6).abs() <= 0.15 * 9e6);
    }

    #[test]
    fn params_grow_with_k() {
        let p: Vec<u64> = [12, 16, 24, 32]
            .iter()
            .map(|&k| tiramisu_ledger(k).unwrap().total_params)
            .collect();
        assert!(p.windows(2).all(|w| w[0] < w[1]), "{p:?}");
    }

    #[test]
    fn unet_levels() {
        let l = unet_ledger();
        assert_eq!(l.entries[1].params, 832);
        let copies: Vec<_> = l
            .entries
            .iter()
            .filter(|e| e.kind == LayerKind::UpsampleCopy)
            .collect();
        assert_eq!(copies[0].out_features, 128);
        assert_eq!(copies[0].spatial, Some(128));
        assert_eq!(copies[1].out_features, 64);
        // Each copy stacks decoder maps on the same-level encoder maps.
        for c in copies {
            assert_eq!(c.out_features, 2 * c.in_features);
        }
        assert_eq!(l.total_params, 939_765);
        assert!((l.total_params as f64 - 1e6).abs() <= 0.15 * 1e6);
        let sizes: Vec<u32> = l.entries.iter().filter_map(|e| e.spatial).collect();
        for w in sizes.windows(2) {
            assert!(w[0] == w[1] || w[0] == 2 * w[1] || 2 * w[0] == w[1]);
        }
        assert_eq!(l.entries.last().unwrap().out_features, 21);
    }

    #[test]
    fn lstm_counts() {
        let l = lstm_ledger(64, 512, 64).unwrap();
        assert_eq!(l.entries[1].params, 1_181_696);
        assert_eq!(l.entries[2].params, 1026);
        assert_eq!(l.output_shape, Some([64, 2]));
        assert!(lstm_ledger(0, 512, 64).is_err());
    }

    #[test]
    fn bad_growth_rate() {
        assert!(tiramisu_ledger(0).is_err());
        assert!(tiramisu_ledger_with(16, &[4, 5], 48).is_err());
    }

    #[test]
    fn json_names_kinds() {
        let j = tiramisu_ledger(16).unwrap().to_json();
        assert!(j.contains("\"transition_up+dense_block\""));
        assert!(j.contains("\"published\": 578"));
    }
}
