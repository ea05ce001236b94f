//! Degree-2 polynomial SVMs: model files, fixed-point quantization and an
//! integer reference inference.
//!
//! Model file:
//!
//! ```text
//! classes 2
//! features 3
//! degree 2
//! gamma 0.5
//! coef0 1
//! class 0
//! rho 0.25
//! 1.5 10 20 30        # alpha followed by the support vector
//! class 1
//! rho -0.25
//! -1.5 10 20 30
//! ```
//!
//! Fixed-point contract, per lane: `dot = sum x_f * sv_f` (exact),
//! `t = (dot + c0_q) >> shift`, `score_c = sum alpha_q * t^2 - rho_q`.
//! `c0_q = round(coef0 / gamma)`; `shift` is the least that keeps the
//! largest reachable `t` within `t_bits`; `alpha_q` and `rho_q` share one
//! scale chosen so the largest `|alpha_q|` fills `alpha_bits - 1` bits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub alpha: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub rho: f64,
    pub svs: Vec<SupportVector>,
}

/// One-vs-all model: one binary machine per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub n_features: usize,
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
    pub classes: Vec<ClassModel>,
}

fn model_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Model(format!("line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| model_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| model_err(line, format!("bad {what} `{tok}`")))
}

impl SvmModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_svs(&self) -> usize {
        self.classes.iter().map(|c| c.svs.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree != 2 {
            return Err(Error::Model(format!(
                "degree {} unsupported; only degree 2",
                self.degree
            )));
        }
        if self.classes.is_empty() || self.n_features == 0 {
            return Err(Error::Model("need at least one class and one feature".into()));
        }
        if !(self.gamma.is_finite() && self.coef0.is_finite()) {
            return Err(Error::Model("gamma and coef0 must be finite".into()));
        }
        for (c, cl) in self.classes.iter().enumerate() {
            if !cl.rho.is_finite() {
                return Err(Error::Model(format!("class {c}: rho not finite")));
            }
            for sv in &cl.svs {
                if sv.values.len() != self.n_features {
                    return Err(Error::Dimension {
                        expected: self.n_features,
                        got: sv.values.len(),
                    });
                }
                if !sv.alpha.is_finite() || sv.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Model(format!("class {c}: non-finite value")));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n_classes: Option<usize> = None;
        let mut n_features: Option<usize> = None;
        let mut degree: Option<u32> = None;
        let mut gamma: Option<f64> = None;
        let mut coef0: Option<f64> = None;
        let mut classes: Vec<ClassModel> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let ln = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let head = toks.next().unwrap();
            match head {
                "classes" => n_classes = Some(num(toks.next(), ln, "class count")?),
                "features" => n_features = Some(num(toks.next(), ln, "feature count")?),
                "degree" => degree = Some(num(toks.next(), ln, "degree")?),
                "gamma" => gamma = Some(num(toks.next(), ln, "gamma")?),
                "coef0" => coef0 = Some(num(toks.next(), ln, "coef0")?),
                "class" => {
                    let i: usize = num(toks.next(), ln, "class index")?;
                    if i != classes.len() {
                        return Err(model_err(ln, format!("expected class {}", classes.len())));
                    }
                    classes.push(ClassModel {
                        rho: 0.0,
                        svs: Vec::new(),
                    });
                }
                "rho" => {
                    let cl = classes
                        .last_mut()
                        .ok_or_else(|| model_err(ln, "rho before class"))?;
                    cl.rho = num(toks.next(), ln, "rho")?;
                }
                _ => {
                    let cl = classes
                        .last_mut()
                        .ok_or_else(|| model_err(ln, "support vector before class"))?;
                    let alpha: f64 = num(Some(head), ln, "alpha")?;
                    let values = toks
                        .map(|t| num(Some(t), ln, "feature"))
                        .collect::<Result<Vec<f64>>>()?;
                    cl.svs.push(SupportVector { alpha, values });
                }
            }
            if line.split_whitespace().count() > 2
                && ["classes", "features", "degree", "gamma", "coef0", "class", "rho"]
                    .contains(&head)
            {
                return Err(model_err(ln, format!("trailing tokens after `{head}`")));
            }
        }
        let need = |o: Option<()>, what: &str| o.ok_or_else(|| Error::Model(format!("missing `{what}` header")));
        need(n_classes.map(|_| ()), "classes")?;
        need(n_features.map(|_| ()), "features")?;
        need(degree.map(|_| ()), "degree")?;
        let m = SvmModel {
            n_features: n_features.unwrap(),
            degree: degree.unwrap(),
            gamma: gamma.unwrap_or(1.0),
            coef0: coef0.unwrap_or(0.0),
            classes,
        };
        if m.classes.len() != n_classes.unwrap() {
            return Err(Error::Model(format!(
                "header says {} classes, found {}",
                n_classes.unwrap(),
                m.classes.len()
            )));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "classes {}", self.classes.len());
        let _ = writeln!(s, "features {}", self.n_features);
        let _ = writeln!(s, "degree {}", self.degree);
        let _ = writeln!(s, "gamma {:?}", self.gamma);
        let _ = writeln!(s, "coef0 {:?}", self.coef0);
        for (i, c) in self.classes.iter().enumerate() {
            let _ = writeln!(s, "class {i}");
            let _ = writeln!(s, "rho {:?}", c.rho);
            for sv in &c.svs {
                let _ = write!(s, "{:?}", sv.alpha);
                for v in &sv.values {
                    let _ = write!(s, " {v:?}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Real-valued decision scores.
    pub fn float_scores(&self, x: &[u8]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self
            .classes
            .iter()
            .map(|c| {
                c.svs
                    .iter()
                    .map(|sv| {
                        let dot: f64 = sv.values.iter().zip(x).map(|(v, &xi)| v * xi as f64).sum();
                        let k = self.gamma * dot + self.coef0;
                        sv.alpha * k * k
                    })
                    .sum::<f64>()
                    - c.rho
            })
            .collect())
    }

    pub fn predict_float(&self, x: &[u8]) -> Result<usize> {
        let s = self.float_scores(x)?;
        let mut best = 0;
        for (i, &v) in s.iter().enumerate() {
            if v > s[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

/// Requested fixed-point widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantWidths {
    /// Signed width of `alpha_q`.
    pub alpha_bits: u32,
    /// Width of the shifted kernel base `t`.
    pub t_bits: u32,
}

impl Default for QuantWidths {
    fn default() -> Self {
        QuantWidths {
            alpha_bits: 16,
            t_bits: 16,
        }
    }
}

/// Row counts the code generator needs, derived from the quantized values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneWidths {
    pub dot: usize,
    pub t: usize,
    /// Magnitude bits of `|alpha_q|`.
    pub alpha: usize,
    /// Two's-complement width of `alpha_q * t^2`.
    pub term: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantSv {
    pub alpha: i32,
    pub values: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantClass {
    pub rho_q: i64,
    pub svs: Vec<QuantSv>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub n_features: usize,
    pub shift: u32,
    pub c0_q: u64,
    /// Real score per integer score unit.
    pub scale: f64,
    /// Largest `|alpha_q * unit - alpha|`, in alpha units.
    pub max_alpha_error: f64,
    pub widths: QuantWidths,
    pub classes: Vec<QuantClass>,
}

fn bit_len(v: u64) -> usize {
    (64 - v.leading_zeros() as usize).max(1)
}

impl QuantizedModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_svs(&self) -> usize {
        self.classes.iter().map(|c| c.svs.len()).sum()
    }

    fn max_dot(&self) -> u64 {
        self.classes
            .iter()
            .flat_map(|c| &c.svs)
            .map(|sv| 255 * sv.values.iter().map(|&v| v as u64).sum::<u64>())
            .max()
            .unwrap_or(0)
            + self.c0_q
    }

    pub fn widths(&self) -> LaneWidths {
        let max_dot = self.max_dot();
        let dot = bit_len(max_dot);
        let t = bit_len(max_dot >> self.shift);
        let max_alpha = self
            .classes
            .iter()
            .flat_map(|c| &c.svs)
            .map(|sv| sv.alpha.unsigned_abs() as u64)
            .max()
            .unwrap_or(0);
        let alpha = bit_len(max_alpha);
        LaneWidths {
            dot,
            t,
            alpha,
            term: 2 * t + alpha + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.n_features == 0 {
            return Err(Error::Quantization("empty model".into()));
        }
        let lim = 1i64 << (self.widths.alpha_bits - 1);
        for c in &self.classes {
            for sv in &c.svs {
                if sv.values.len() != self.n_features {
                    return Err(Error::Dimension {
                        expected: self.n_features,
                        got: sv.values.len(),
                    });
                }
                if (sv.alpha as i64).abs() >= lim {
                    return Err(Error::Quantization(format!(
                        "alpha {} exceeds {} bits",
                        sv.alpha, self.widths.alpha_bits
                    )));
                }
            }
        }
        if (self.max_dot() >> self.shift) >> self.widths.t_bits != 0 {
            return Err(Error::Quantization("kernel base overflows t_bits".into()));
        }
        Ok(())
    }
}

/// Fixed-point conversion per the lane contract.
pub fn quantize(model: &SvmModel, widths: QuantWidths) -> Result<QuantizedModel> {
    model.validate()?;
    if !(2..=31).contains(&widths.alpha_bits) || !(1..=31).contains(&widths.t_bits) {
        return Err(Error::Quantization(format!("unsupported widths {widths:?}")));
    }
    if !(model.gamma > 0.0) {
        return Err(Error::Quantization("gamma must be positive".into()));
    }
    if model.coef0 < 0.0 {
        return Err(Error::Quantization("coef0 must be non-negative".into()));
    }
    let c0 = (model.coef0 / model.gamma).round();
    if c0 >= 2f64.powi(40) {
        return Err(Error::Quantization(format!("coef0/gamma = {c0} too large")));
    }
    let c0_q = c0 as u64;
    let mut classes = Vec::with_capacity(model.classes.len());
    for c in &model.classes {
        let mut svs = Vec::with_capacity(c.svs.len());
        for sv in &c.svs {
            let values = sv
                .values
                .iter()
                .map(|&v| {
                    let r = v.round();
                    if (0.0..=255.0).contains(&r) {
                        Ok(r as u8)
                    } else {
                        Err(Error::Quantization(format!("support vector value {v} not 8-bit")))
                    }
                })
                .collect::<Result<Vec<u8>>>()?;
            svs.push(QuantSv { alpha: 0, values });
        }
        classes.push(QuantClass { rho_q: 0, svs });
    }
    let mut q = QuantizedModel {
        n_features: model.n_features,
        shift: 0,
        c0_q,
        scale: 1.0,
        max_alpha_error: 0.0,
        widths,
        classes,
    };
    let max_dot = q.max_dot();
    while (max_dot >> q.shift) >> widths.t_bits != 0 {
        q.shift += 1;
    }

    // Real kernel ~= gamma^2 * 4^shift * t^2.
    let kscale = model.gamma * model.gamma * 4f64.powi(q.shift as i32);
    let alpha_lim = ((1i64 << (widths.alpha_bits - 1)) - 1) as f64;
    let max_alpha = model
        .classes
        .iter()
        .flat_map(|c| &c.svs)
        .map(|sv| sv.alpha.abs())
        .fold(0.0, f64::max);
    let unit = if max_alpha > 0.0 { max_alpha / alpha_lim } else { 1.0 };
    q.scale = unit * kscale;
    for (qc, c) in q.classes.iter_mut().zip(&model.classes) {
        let rho = (c.rho / q.scale).round();
        if rho.abs() >= 2f64.powi(62) {
            return Err(Error::Quantization(format!("rho {} overflows", c.rho)));
        }
        qc.rho_q = rho as i64;
        for (qs, s) in qc.svs.iter_mut().zip(&c.svs) {
            qs.alpha = (s.alpha / unit).round() as i32;
            q.max_alpha_error = q
                .max_alpha_error
                .max((qs.alpha as f64 * unit - s.alpha).abs());
        }
    }
    q.validate()?;
    Ok(q)
}

/// Lowest index wins ties.
pub fn argmax(scores: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Integer scores per class and the predicted class.
pub fn oracle_infer(q: &QuantizedModel, x: &[u8]) -> Result<(Vec<i64>, usize)> {
    if x.len() != q.n_features {
        return Err(Error::Dimension {
            expected: q.n_features,
            got: x.len(),
        });
    }
    let scores: Vec<i64> = q
        .classes
        .iter()
        .map(|c| {
            c.svs
                .iter()
                .map(|sv| {
                    let dot: u64 = sv.values.iter().zip(x).map(|(&v, &xi)| v as u64 * xi as u64).sum();
                    let t = (dot + q.c0_q) >> q.shift;
                    sv.alpha as i64 * (t * t) as i64
                })
                .sum::<i64>()
                - c.rho_q
        })
        .collect();
    let k = argmax(&scores);
    Ok((scores, k))
}

/// Labelled 8-bit samples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub labels: Vec<usize>,
    pub samples: Vec<Vec<u8>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `label,f1,...,fF` rows; a non-numeric first row is taken as a header.
    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut ds = Dataset::default();
        let mut width = None;
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            if i == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
                continue;
            }
            let parse_err = |what: &str| Error::Io(format!("dataset row {}: bad {what}", i + 1));
            let label: usize = rec.get(0).ok_or_else(|| parse_err("label"))?.parse().map_err(|_| parse_err("label"))?;
            let feats = rec
                .iter()
                .skip(1)
                .map(|f| f.parse::<u8>().map_err(|_| parse_err("8-bit feature")))
                .collect::<Result<Vec<u8>>>()?;
            match width {
                None => width = Some(feats.len()),
                Some(w) if w != feats.len() => {
                    return Err(Error::Dimension {
                        expected: w,
                        got: feats.len(),
                    })
                }
                _ => {}
            }
            ds.labels.push(label);
            ds.samples.push(feats);
        }
        Ok(ds)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn n_features(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }
}

/// Fraction of samples where `predict` returns the label.
pub fn accuracy(ds: &Dataset, mut predict: impl FnMut(&[u8]) -> Result<usize>) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (x, &y) in ds.samples.iter().zip(&ds.labels) {
        if predict(x)? == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TINY: &str = "classes 2\nfeatures 3\ndegree 2\ngamma 0.5\ncoef0 1\n\
class 0\nrho 0.25\n1.5 10 20 30\nclass 1\nrho -0.25\n-1.5 10 20 30\n";

    #[test]
    fn parse_minimal() {
        let m = SvmModel::parse(TINY).unwrap();
        assert_eq!(m.n_classes(), 2);
        assert_eq!(m.n_features, 3);
        assert_eq!(m.classes[1].rho, -0.25);
        assert_eq!(m.classes[0].svs[0].values, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn degree_three_rejected() {
        let t = TINY.replace("degree 2", "degree 3");
        assert!(matches!(SvmModel::parse(&t), Err(Error::Model(_))));
    }

    #[test]
    fn malformed_rejected() {
        assert!(SvmModel::parse(&TINY.replace("1.5 10 20 30", "1.5 10 20")).is_err());
        assert!(SvmModel::parse(&TINY.replace("classes 2", "classes 3")).is_err());
        assert!(SvmModel::parse(&TINY.replace("class 1", "class 4")).is_err());
        assert!(SvmModel::parse(&TINY.replace("rho 0.25", "rho x")).is_err());
        assert!(SvmModel::parse("features 2\ndegree 2\n").is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let m = SvmModel::parse(TINY).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        m.save(&p).unwrap();
        assert_eq!(SvmModel::load(&p).unwrap(), m);
    }

    #[test]
    fn zero_model_quantizes_to_zero() {
        let m = SvmModel {
            n_features: 2,
            degree: 2,
            gamma: 1.0,
            coef0: 0.0,
            classes: vec![ClassModel {
                rho: 0.0,
                svs: vec![SupportVector {
                    alpha: 0.0,
                    values: vec![0.0, 0.0],
                }],
            }],
        };
        let q = quantize(&m, QuantWidths::default()).unwrap();
        assert_eq!(q.classes[0].svs[0], QuantSv { alpha: 0, values: vec![0, 0] });
        assert_eq!(q.classes[0].rho_q, 0);
        assert_eq!(q.c0_q, 0);
    }

    #[test]
    fn alpha_rounding_bound() {
        let alphas: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
        let m = SvmModel {
            n_features: 1,
            degree: 2,
            gamma: 1.0,
            coef0: 0.0,
            classes: vec![ClassModel {
                rho: 0.0,
                svs: alphas
                    .iter()
                    .map(|&a| SupportVector { alpha: a, values: vec![1.0] })
                    .collect(),
            }],
        };
        let q = quantize(&m, QuantWidths::default()).unwrap();
        assert!(q.max_alpha_error <= 2f64.powi(-15), "{}", q.max_alpha_error);
        assert_eq!(q.classes[0].svs[200].alpha, 32767);
        assert_eq!(q.classes[0].svs[0].alpha, -32767);
    }

    #[test]
    fn one_hot_model_picks_matching_class() {
        let n = 4;
        let m = SvmModel {
            n_features: n,
            degree: 2,
            gamma: 1.0,
            coef0: 0.0,
            classes: (0..n)
                .map(|c| ClassModel {
                    rho: 0.0,
                    svs: vec![SupportVector {
                        alpha: 1.0,
                        values: (0..n).map(|f| if f == c { 1.0 } else { 0.0 }).collect(),
                    }],
                })
                .collect(),
        };
        let q = quantize(&m, QuantWidths::default()).unwrap();
        for k in 0..n {
            let x: Vec<u8> = (0..n).map(|f| (f == k) as u8).collect();
            assert_eq!(oracle_infer(&q, &x).unwrap().1, k);
        }
        let (s, k) = oracle_infer(&q, &vec![0; n]).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
        assert_eq!(k, 0);
        assert!(oracle_infer(&q, &[1]).is_err());
    }

    #[test]
    fn out_of_range_sv_rejected() {
        let m = SvmModel::parse(&TINY.replace("1.5 10 20 30", "1.5 10 20 300")).unwrap();
        assert!(matches!(quantize(&m, QuantWidths::default()), Err(Error::Quantization(_))));
        let mut m = SvmModel::parse(TINY).unwrap();
        m.gamma = 0.0;
        assert!(quantize(&m, QuantWidths::default()).is_err());
    }

    #[test]
    fn shift_keeps_t_in_range() {
        let m = SvmModel {
            n_features: 40,
            degree: 2,
            gamma: 1.0,
            coef0: 0.0,
            classes: vec![ClassModel {
                rho: 0.0,
                svs: vec![SupportVector { alpha: 1.0, values: vec![255.0; 40] }],
            }],
        };
        let q = quantize(&m, QuantWidths::default()).unwrap();
        let w = q.widths();
        assert!(w.t <= 16);
        assert_eq!(w.dot, 22);
        assert_eq!(q.shift, 6);
        let (s, _) = oracle_infer(&q, &[255; 40]).unwrap();
        assert_eq!(s[0], 32767 * (((40 * 255 * 255u64) >> 6).pow(2)) as i64);
    }

    #[test]
    fn dataset_csv() {
        let ds = Dataset::from_reader("label,a,b\n1, 2,3\n0,255,0\n".as_bytes()).unwrap();
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.samples[1], vec![255, 0]);
        assert!(Dataset::from_reader("1,2,3\n0,1\n".as_bytes()).is_err());
        assert!(Dataset::from_reader("1,256\n".as_bytes()).is_err());
        let acc = accuracy(&ds, |x| Ok((x[0] < 100) as usize)).unwrap();
        assert_eq!(acc, 1.0);
    }

    proptest! {
        #[test]
        fn argmax_shift_invariant(s in prop::collection::vec(-1000i64..1000, 1..10), c in -1000i64..1000) {
            let shifted: Vec<i64> = s.iter().map(|v| v + c).collect();
            prop_assert_eq!(argmax(&s), argmax(&shifted));
        }

        #[test]
        fn argmax_is_first_maximum(s in prop::collection::vec(-3i64..3, 1..10)) {
            let k = argmax(&s);
            let m = *s.iter().max().unwrap();
            prop_assert_eq!(s[k], m);
            prop_assert!(s[..k].iter().all(|&v| v < m));
        }

        #[test]
        fn text_round_trip(
            alphas in prop::collection::vec(-4.0f64..4.0, 1..5),
            rho in -3.0f64..3.0,
        ) {
            let m = SvmModel {
                n_features: 2,
                degree: 2,
                gamma: 0.125,
                coef0: 1.0,
                classes: vec![ClassModel {
                    rho,
                    svs: alphas.iter().map(|&a| SupportVector { alpha: a, values: vec![3.0, 250.0] }).collect(),
                }],
            };
            prop_assert_eq!(SvmModel::parse(&m.to_text()).unwrap(), m);
        }
    }
}
