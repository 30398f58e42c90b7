//! JSON-lines records: detections and per-object label distributions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoxParams;
use crate::inference::{LabelPosterior, Mat5};
use crate::spatial::{DiscreteBoxDistribution, ProbBox};

/// Diagonal variances over all seven box parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxVariance {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl BoxVariance {
    pub const ZERO: BoxVariance = BoxVariance {
        cx: 0.0,
        cy: 0.0,
        cz: 0.0,
        l: 0.0,
        w: 0.0,
        h: 0.0,
        yaw: 0.0,
    };

    pub fn values(&self) -> [f64; 7] {
        [self.cx, self.cy, self.cz, self.l, self.w, self.h, self.yaw]
    }

    /// The BEV subset `[cx, cy, l, w, yaw]`.
    pub fn bev(&self) -> [f64; 5] {
        [self.cx, self.cy, self.l, self.w, self.yaw]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let v = self.values().map(|x| x * factor);
        BoxVariance {
            cx: v[0],
            cy: v[1],
            cz: v[2],
            l: v[3],
            w: v[4],
            h: v[5],
            yaw: v[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: String,
    pub class: String,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BoxParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<BoxVariance>,
}

impl DetectionRecord {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::param("score", format!("must lie in [0, 1], got {}", self.score)));
        }
        if let Some(var) = &self.var {
            if var.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::param("var", "variances must be finite and non-negative"));
            }
        }
        Ok(())
    }

    pub fn is_probabilistic(&self) -> bool {
        self.var.is_some()
    }

    /// Gaussian over the BEV parameters; a point mass without variances.
    pub fn posterior(&self) -> Result<LabelPosterior> {
        match &self.var {
            Some(v) => LabelPosterior::from_variances(self.bbox, v.bev()),
            None => Ok(LabelPosterior::deterministic(self.bbox)),
        }
    }
}

fn read_jsonl<T, R, F>(input: R, context: &str, mut check: F) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned,
    R: BufRead,
    F: FnMut(&mut T) -> Result<()>,
{
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record: T =
            serde_json::from_str(&line).map_err(|e| Error::parse(context, i + 1, e.to_string()))?;
        check(&mut record).map_err(|e| Error::parse(context, i + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

fn normalized(b: &BoxParams) -> Result<BoxParams> {
    BoxParams::new(b.c1, b.c2, b.c3, b.l, b.w, b.h, b.yaw)
}

/// Reads one detection per non-blank line. Yaw is wrapped into `(-pi, pi]`.
pub fn read_detections_jsonl<R: BufRead>(input: R) -> Result<Vec<DetectionRecord>> {
    read_jsonl(input, "detections", |d: &mut DetectionRecord| {
        d.validate()?;
        d.bbox = normalized(&d.bbox)?;
        Ok(())
    })
}

pub fn write_detections_jsonl<W: Write>(mut out: W, records: &[DetectionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Input(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedBox {
    #[serde(rename = "box")]
    pub bbox: BoxParams,
    pub weight: f64,
}

/// A labeled object with its box distribution.
///
/// Either `covariance` (a Gaussian over `[cx, cy, l, w, yaw]` about `mean`) or
/// `modes` (a discrete distribution) is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub frame: String,
    pub object: usize,
    pub class: String,
    pub mean: BoxParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<[[f64; 5]; 5]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<WeightedBox>>,
    /// Number of LiDAR points used for inference.
    #[serde(default)]
    pub num_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_em: Option<f64>,
}

impl LabelRecord {
    pub fn from_posterior(frame: &str, object: usize, class: &str, posterior: &LabelPosterior) -> Self {
        let c = &posterior.covariance;
        LabelRecord {
            frame: frame.to_string(),
            object,
            class: class.to_string(),
            mean: posterior.mean,
            covariance: Some(std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)]))),
            modes: None,
            num_points: 0,
            sigma_em: None,
        }
    }

    pub fn distribution(&self) -> Result<ProbBox> {
        match (&self.covariance, &self.modes) {
            (Some(_), Some(_)) => Err(Error::Input("record has both `covariance` and `modes`".into())),
            (Some(c), None) => {
                let cov = Mat5::from_fn(|i, j| c[i][j]);
                Ok(ProbBox::Gaussian(LabelPosterior::new(self.mean, cov)?))
            }
            (None, Some(modes)) => Ok(ProbBox::Mixture(DiscreteBoxDistribution::new(
                modes.iter().map(|m| (m.bbox, m.weight)).collect(),
            )?)),
            (None, None) => Ok(ProbBox::Gaussian(LabelPosterior::deterministic(self.mean))),
        }
    }
}

pub fn read_labels_jsonl<R: BufRead>(input: R) -> Result<Vec<LabelRecord>> {
    read_jsonl(input, "labels", |r: &mut LabelRecord| {
        r.mean = normalized(&r.mean)?;
        if let Some(modes) = &mut r.modes {
            for m in modes.iter_mut() {
                m.bbox = normalized(&m.bbox)?;
            }
        }
        r.distribution().map(|_| ())
    })
}

pub fn write_labels_jsonl<W: Write>(mut out: W, records: &[LabelRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Input(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"frame":"000001","class":"Car","score":0.8,"box":{"cx":1,"cy":2,"cz":0,"l":4,"w":2,"h":1.5,"yaw":0.1}}"#;

    #[test]
    fn minimal_record_is_deterministic() {
        let d = read_detections_jsonl(MINIMAL.as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
        assert!(!d[0].is_probabilistic());
        assert!(d[0].posterior().unwrap().is_deterministic());
    }

    #[test]
    fn variance_block_makes_it_probabilistic() {
        let line = MINIMAL.replace(
            "}}",
            r#"},"var":{"cx":0.1,"cy":0.1,"cz":0.0,"l":0.2,"w":0.05,"h":0.0,"yaw":0.01}}"#,
        );
        let d = read_detections_jsonl(line.as_bytes()).unwrap();
        assert!(d[0].is_probabilistic());
        let p = d[0].posterior().unwrap();
        assert_eq!(p.covariance[(2, 2)], 0.2);
        assert_eq!(p.covariance[(4, 4)], 0.01);
    }

    #[test]
    fn validation_errors_carry_line_numbers() {
        let bad_score = MINIMAL.replace("0.8", "1.5");
        let text = format!("{MINIMAL}\n\n{bad_score}\n");
        assert!(matches!(read_detections_jsonl(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let negative = MINIMAL.replace(
            "}}",
            r#"},"var":{"cx":-0.1,"cy":0.1,"cz":0.0,"l":0.2,"w":0.05,"h":0.0,"yaw":0.01}}"#,
        );
        assert!(read_detections_jsonl(negative.as_bytes()).is_err());
        assert!(matches!(read_detections_jsonl("{not json".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn detection_round_trip() {
        let d = read_detections_jsonl(MINIMAL.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_detections_jsonl(&mut buf, &d).unwrap();
        assert_eq!(read_detections_jsonl(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn label_records() {
        let b = BoxParams::bev(0.0, 0.0, 4.0, 2.0, 0.0).unwrap();
        let post = LabelPosterior::from_variances(b, [0.1, 0.05, 0.02, 0.02, 0.01]).unwrap();
        let rec = LabelRecord::from_posterior("f", 3, "Car", &post);
        let mut buf = Vec::new();
        write_labels_jsonl(&mut buf, std::slice::from_ref(&rec)).unwrap();
        let back = read_labels_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
        assert_eq!(back[0].distribution().unwrap(), ProbBox::Gaussian(post));

        let modes = r#"{"frame":"f","object":0,"class":"Car","mean":{"cx":0,"cy":0,"l":4,"w":2,"yaw":0},
            "modes":[{"box":{"cx":0,"cy":0,"l":4,"w":2,"yaw":0},"weight":0.5},{"box":{"cx":0,"cy":5,"l":4,"w":2,"yaw":0},"weight":0.5}]}"#
            .replace('\n', "");
        let rec = &read_labels_jsonl(modes.as_bytes()).unwrap()[0];
        assert!(matches!(rec.distribution().unwrap(), ProbBox::Mixture(_)));
        let bad = modes.replace("0.5}]", "0.6}]");
        assert!(read_labels_jsonl(bad.as_bytes()).is_err());
    }
}
