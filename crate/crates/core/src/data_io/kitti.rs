//! KITTI object labels, calibration and velodyne scans.
//!
//! Labels live in the rectified camera frame (`x` right, `y` down, `z`
//! forward) with `location` at the bottom-face center. Boxes are converted to
//! the ground frame through `(R0_rect * Tr_velo_to_cam)^-1`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix3x4, Matrix4, Point3, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, BoxParams};

pub const DONT_CARE: &str = "DontCare";

/// One parsed line of a KITTI label file.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabel {
    pub class: String,
    pub truncated: f64,
    pub occluded: f64,
    pub alpha: f64,
    /// Image box `[left, top, right, bottom]` in pixels.
    pub bbox: [f64; 4],
    pub h: f64,
    pub w: f64,
    pub l: f64,
    /// Bottom-face center in the rectified camera frame.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabel {
    pub fn is_dont_care(&self) -> bool {
        self.class == DONT_CARE
    }

    /// Camera-frame geometric center.
    pub fn camera_center(&self) -> Point3<f64> {
        Point3::new(self.location[0], self.location[1] - 0.5 * self.h, self.location[2])
    }

    pub fn to_ground(&self, calib: &Calibration) -> Result<BoxParams> {
        let center = calib.camera_to_ground(&self.camera_center());
        // Length axis of the object in the camera frame.
        let (s, c) = self.rotation_y.sin_cos();
        let heading = calib.camera_direction_to_ground(&Vector3::new(c, 0.0, -s));
        let yaw = heading.y.atan2(heading.x);
        BoxParams::new(center.x, center.y, center.z, self.l, self.w, self.h, yaw)
    }

    /// Label for a ground-frame box; image fields are zero.
    pub fn from_ground(class: &str, b: &BoxParams, calib: &Calibration) -> Self {
        let center = calib.ground_to_camera(&b.center());
        let (s, c) = b.yaw.sin_cos();
        let heading = calib.ground_direction_to_camera(&Vector3::new(c, s, 0.0));
        let rotation_y = normalize_angle((-heading.z).atan2(heading.x));
        KittiLabel {
            class: class.to_string(),
            truncated: 0.0,
            occluded: 0.0,
            alpha: 0.0,
            bbox: [0.0; 4],
            h: b.h,
            w: b.w,
            l: b.l,
            location: [center.x, center.y + 0.5 * b.h, center.z],
            rotation_y,
            score: None,
        }
    }

    pub fn to_line(&self) -> String {
        let mut fields = vec![
            self.class.clone(),
            fmt(self.truncated),
            fmt(self.occluded),
            fmt(self.alpha),
        ];
        fields.extend(self.bbox.iter().map(|v| fmt(*v)));
        fields.extend([self.h, self.w, self.l].iter().map(|v| fmt(*v)));
        fields.extend(self.location.iter().map(|v| fmt(*v)));
        fields.push(fmt(self.rotation_y));
        if let Some(s) = self.score {
            fields.push(fmt(s));
        }
        fields.join(" ")
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Parses one label line. `line_no` is 1-based and only used in errors.
pub fn parse_kitti_label_line(text: &str, line_no: usize) -> Result<KittiLabel> {
    const CTX: &str = "kitti label";
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(Error::parse(CTX, line_no, format!("expected 15 or 16 fields, got {}", fields.len())));
    }
    let mut nums = [0.0; 15];
    for (i, f) in fields[1..].iter().enumerate() {
        nums[i] = f
            .parse::<f64>()
            .map_err(|_| Error::parse(CTX, line_no, format!("field {} is not a number: `{f}`", i + 2)))?;
    }
    Ok(KittiLabel {
        class: fields[0].to_string(),
        truncated: nums[0],
        occluded: nums[1],
        alpha: nums[2],
        bbox: [nums[3], nums[4], nums[5], nums[6]],
        h: nums[7],
        w: nums[8],
        l: nums[9],
        location: [nums[10], nums[11], nums[12]],
        rotation_y: nums[13],
        score: (fields.len() == 16).then_some(nums[14]),
    })
}

/// Parses a label file, skipping blank lines.
pub fn parse_kitti_labels(text: &str) -> Result<Vec<KittiLabel>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_kitti_label_line(l, i + 1))
        .collect()
}

/// Camera/LiDAR calibration of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Projection matrices `P0..P3`, when present.
    pub projections: [Option<Matrix3x4<f64>>; 4],
    pub r0_rect: Matrix3<f64>,
    pub tr_velo_to_cam: Matrix3x4<f64>,
    velo_to_rect: Matrix4<f64>,
    rect_to_velo: Matrix4<f64>,
}

impl Calibration {
    pub fn new(r0_rect: Matrix3<f64>, tr_velo_to_cam: Matrix3x4<f64>) -> Result<Self> {
        let mut r0 = Matrix4::identity();
        r0.fixed_view_mut::<3, 3>(0, 0).copy_from(&r0_rect);
        let mut tr = Matrix4::identity();
        tr.fixed_view_mut::<3, 4>(0, 0).copy_from(&tr_velo_to_cam);
        let velo_to_rect = r0 * tr;
        let rect_to_velo = velo_to_rect
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularTransform("R0_rect * Tr_velo_to_cam is not invertible"))?;
        Ok(Calibration {
            projections: [None; 4],
            r0_rect,
            tr_velo_to_cam,
            velo_to_rect,
            rect_to_velo,
        })
    }

    /// Nominal axis permutation: camera `x = -y`, `y = -z`, `z = x` of the ground frame.
    pub fn identity() -> Self {
        let tr = Matrix3x4::new(
            0.0, -1.0, 0.0, 0.0, //
            0.0, 0.0, -1.0, 0.0, //
            1.0, 0.0, 0.0, 0.0,
        );
        Self::new(Matrix3::identity(), tr).expect("axis permutation is invertible")
    }

    /// Parses `KEY: v1 v2 ...` lines. `R0_rect` (9 values) and
    /// `Tr_velo_to_cam` (12 values) are required.
    pub fn parse(text: &str) -> Result<Self> {
        const CTX: &str = "kitti calib";
        let mut projections = [None; 4];
        let mut r0 = None;
        let mut tr = None;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(CTX, n, "expected `KEY: values`"))?;
            let values: Vec<f64> = rest
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::parse(CTX, n, format!("not a number: `{v}`"))))
                .collect::<Result<_>>()?;
            let expect = |count: usize| {
                if values.len() == count {
                    Ok(())
                } else {
                    Err(Error::parse(CTX, n, format!("{key} needs {count} values, got {}", values.len())))
                }
            };
            match key.trim() {
                k @ ("P0" | "P1" | "P2" | "P3") => {
                    expect(12)?;
                    let idx = (k.as_bytes()[1] - b'0') as usize;
                    projections[idx] = Some(Matrix3x4::from_row_slice(&values));
                }
                "R0_rect" => {
                    expect(9)?;
                    r0 = Some(Matrix3::from_row_slice(&values));
                }
                "Tr_velo_to_cam" => {
                    expect(12)?;
                    tr = Some(Matrix3x4::from_row_slice(&values));
                }
                _ => {}
            }
        }
        let r0 = r0.ok_or_else(|| Error::parse(CTX, 0, "missing R0_rect"))?;
        let tr = tr.ok_or_else(|| Error::parse(CTX, 0, "missing Tr_velo_to_cam"))?;
        let mut calib = Self::new(r0, tr)?;
        calib.projections = projections;
        Ok(calib)
    }

    pub fn to_text(&self) -> String {
        let row = |m: &[f64]| m.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        for (i, p) in self.projections.iter().enumerate() {
            if let Some(p) = p {
                out += &format!("P{i}: {}\n", row(p.transpose().as_slice()));
            }
        }
        out += &format!("R0_rect: {}\n", row(self.r0_rect.transpose().as_slice()));
        out += &format!("Tr_velo_to_cam: {}\n", row(self.tr_velo_to_cam.transpose().as_slice()));
        out
    }

    pub fn camera_to_ground(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((self.rect_to_velo * p.to_homogeneous()).xyz())
    }

    pub fn ground_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from((self.velo_to_rect * p.to_homogeneous()).xyz())
    }

    pub fn camera_direction_to_ground(&self, d: &Vector3<f64>) -> Vector3<f64> {
        (self.rect_to_velo * Vector4::new(d.x, d.y, d.z, 0.0)).xyz()
    }

    pub fn ground_direction_to_camera(&self, d: &Vector3<f64>) -> Vector3<f64> {
        (self.velo_to_rect * Vector4::new(d.x, d.y, d.z, 0.0)).xyz()
    }
}

/// A LiDAR return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl LidarPoint {
    pub fn position(&self) -> Point3<f64> {
        Point3::new(self.x as f64, self.y as f64, self.z as f64)
    }
}

/// Little-endian `f32` quadruples `(x, y, z, intensity)`.
pub fn read_velodyne_bin(bytes: &[u8]) -> Result<Vec<LidarPoint>> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::Input(format!(
            "velodyne scan length {} is not a multiple of 16 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let f = |i: usize| f32::from_le_bytes([c[i], c[i + 1], c[i + 2], c[i + 3]]);
            LidarPoint {
                x: f(0),
                y: f(4),
                z: f(8),
                intensity: f(12),
            }
        })
        .collect())
}

pub fn write_velodyne_bin(points: &[LidarPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 * points.len());
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// A frame's scan and its non-DontCare labels in the ground frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub id: String,
    pub points: Vec<LidarPoint>,
    pub labels: Vec<(String, BoxParams)>,
    pub calibration: Calibration,
}

/// Paths of one frame under a KITTI object-detection root.
pub fn frame_paths(root: &Path, id: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        root.join("label_2").join(format!("{id}.txt")),
        root.join("calib").join(format!("{id}.txt")),
        root.join("velodyne").join(format!("{id}.bin")),
    )
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn with_path(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { line, message, .. } => Error::Parse {
            context: path.display().to_string(),
            line,
            message,
        },
        other => other,
    }
}

pub fn load_frame(root: &Path, id: &str) -> Result<FrameRecord> {
    let (label_path, calib_path, velo_path) = frame_paths(root, id);
    let calibration = Calibration::parse(&read_text(&calib_path)?).map_err(|e| with_path(&calib_path, e))?;
    let labels = parse_kitti_labels(&read_text(&label_path)?)
        .map_err(|e| with_path(&label_path, e))?
        .into_iter()
        .filter(|l| !l.is_dont_care())
        .map(|l| Ok((l.class.clone(), l.to_ground(&calibration)?)))
        .collect::<Result<Vec<_>>>()?;
    let bytes = fs::read(&velo_path).map_err(|e| Error::io(&velo_path, e))?;
    let points = read_velodyne_bin(&bytes).map_err(|e| match e {
        Error::Input(m) => Error::Input(format!("{}: {m}", velo_path.display())),
        other => other,
    })?;
    Ok(FrameRecord {
        id: id.to_string(),
        points,
        labels,
        calibration,
    })
}

/// Frame ids with a label file, sorted.
pub fn list_frames(root: &Path) -> Result<Vec<String>> {
    let dir = root.join("label_2");
    let mut ids: Vec<String> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| {
            let path = entry.path();
            (path.extension()? == "txt").then(|| path.file_stem()?.to_str().map(str::to_string))?
        })
        .collect();
    ids.sort();
    Ok(ids)
}

/// Writes a frame in KITTI layout under `root`.
pub fn write_frame(root: &Path, frame: &FrameRecord) -> Result<()> {
    let (label_path, calib_path, velo_path) = frame_paths(root, &frame.id);
    for p in [&label_path, &calib_path, &velo_path] {
        let dir = p.parent().expect("frame paths have a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = String::new();
    for (class, b) in &frame.labels {
        text += &KittiLabel::from_ground(class, b, &frame.calibration).to_line();
        text.push('\n');
    }
    fs::write(&label_path, text).map_err(|e| Error::io(&label_path, e))?;
    fs::write(&calib_path, frame.calibration.to_text()).map_err(|e| Error::io(&calib_path, e))?;
    fs::write(&velo_path, write_velodyne_bin(&frame.points)).map_err(|e| Error::io(&velo_path, e))?;
    Ok(())
}
