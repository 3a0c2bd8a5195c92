//! OTB/POT style sequence directories.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{Quad, Rect};

/// Ground truth of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroundTruth {
    Rect(Rect),
    Quad(Quad),
}

impl GroundTruth {
    pub fn quad(&self) -> Quad {
        match self {
            GroundTruth::Rect(r) => r.to_quad(),
            GroundTruth::Quad(q) => *q,
        }
    }

    pub fn rect(&self) -> Rect {
        match self {
            GroundTruth::Rect(r) => *r,
            GroundTruth::Quad(q) => q.bounding_rect(),
        }
    }

    pub fn center(&self) -> (f64, f64) {
        match self {
            GroundTruth::Rect(r) => r.center(),
            GroundTruth::Quad(q) => q.center(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Option<Vec<GroundTruth>>,
}

const FRAME_EXTS: [&str; 6] = ["jpg", "jpeg", "png", "ppm", "pgm", "pnm"];
const GT_FILES: [&str; 2] = ["groundtruth_rect.txt", "groundtruth.txt"];

/// Parses ground-truth rows of 4 (`x,y,w,h`) or 8 (corner) numbers separated
/// by commas, tabs or spaces. Coordinates are 1-based in the file and
/// returned 0-based.
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let nums = line
            .split([',', '\t', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, i + 1, format!("not a number: {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let gt = match nums.len() {
            4 => GroundTruth::Rect(Rect::new(nums[0] - 1.0, nums[1] - 1.0, nums[2], nums[3])),
            8 => {
                let shifted: Vec<f64> = nums.iter().map(|v| v - 1.0).collect();
                GroundTruth::Quad(Quad::from_slice(&shifted).expect("eight values"))
            }
            n => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected 4 or 8 numbers, got {n}"),
                ))
            }
        };
        out.push(gt);
    }
    Ok(out)
}

/// Writes quads as 1-based 8-number rows.
pub fn format_quads(quads: &[Quad]) -> String {
    let mut s = String::new();
    for q in quads {
        let row: Vec<String> = q.to_vec().iter().map(|v| format!("{:.6}", v + 1.0)).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| FRAME_EXTS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    frames.sort();
    Ok(frames)
}

/// Loads a sequence directory. Frames are read from `img/` when present,
/// otherwise from the directory itself, in file-name order.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let img = dir.join("img");
    let frames = if img.is_dir() {
        list_frames(&img)?
    } else {
        list_frames(dir)?
    };
    if frames.is_empty() {
        return Err(Error::parse(dir, 0, "no frames found"));
    }
    let mut ground_truth = None;
    for name in GT_FILES {
        let p = dir.join(name);
        if p.is_file() {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let gt = parse_ground_truth(&text, &p)?;
            if gt.len() != frames.len() {
                return Err(Error::parse(
                    &p,
                    0,
                    format!("{} ground-truth rows for {} frames", gt.len(), frames.len()),
                ));
            }
            ground_truth = Some(gt);
            break;
        }
    }
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Ok(Sequence {
        name,
        frames,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rect_row_is_shifted_to_zero_based() {
        let gt = parse_ground_truth("10,20,30,40\n", Path::new("gt")).unwrap();
        assert_eq!(gt, vec![GroundTruth::Rect(Rect::new(9.0, 19.0, 30.0, 40.0))]);
    }

    #[test]
    fn quad_row_keeps_corner_order() {
        let gt = parse_ground_truth("1 1 11 1 11 6 1 6", Path::new("gt")).unwrap();
        let GroundTruth::Quad(q) = gt[0] else {
            panic!("expected quad")
        };
        assert_eq!(q.0, [(0.0, 0.0), (10.0, 0.0), (10.0, 5.0), (0.0, 5.0)]);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let e = parse_ground_truth("1,2,3,4\n1,2,3\n", Path::new("gt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_ground_truth("1,2,x,4\n", Path::new("gt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn directory_loading() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        std::fs::create_dir(&img).unwrap();
        let f = crate::imgproc::Frame::filled(4, 4, 1, 0.5);
        for i in [2, 1, 3] {
            crate::imgproc::save_pnm(&f, &img.join(format!("{i:04}.pgm"))).unwrap();
        }
        std::fs::write(
            dir.path().join("groundtruth_rect.txt"),
            "1,1,2,2\n1,1,2,2\n1,1,2,2\n",
        )
        .unwrap();
        let s = load_sequence(dir.path()).unwrap();
        assert_eq!(s.frames.len(), 3);
        assert!(s.frames[0].ends_with("0001.pgm"));
        assert_eq!(s.ground_truth.unwrap().len(), 3);

        std::fs::write(dir.path().join("groundtruth_rect.txt"), "1,1,2,2\n").unwrap();
        assert!(load_sequence(dir.path()).is_err());
        assert!(load_sequence(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn quads_round_trip_through_text() {
        let q = Quad([(0.5, 1.0), (10.25, 2.0), (9.0, 7.5), (-1.0, 6.0)]);
        let back = parse_ground_truth(&format_quads(&[q]), Path::new("gt")).unwrap();
        let GroundTruth::Quad(b) = back[0] else { panic!() };
        for (p, r) in b.0.iter().zip(q.0) {
            assert!((p.0 - r.0).abs() < 1e-6 && (p.1 - r.1).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn separators_are_interchangeable(
            vals in proptest::collection::vec(-1000i32..1000, 4),
            seps in proptest::collection::vec(prop_oneof![Just(","), Just("\t"), Just(" "), Just(", "), Just("  ")], 3),
        ) {
            let canonical = vals.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            let mut mixed = vals[0].to_string();
            for (v, s) in vals[1..].iter().zip(&seps) {
                mixed.push_str(s);
                mixed.push_str(&v.to_string());
            }
            prop_assert_eq!(
                parse_ground_truth(&canonical, Path::new("a")).unwrap(),
                parse_ground_truth(&mixed, Path::new("b")).unwrap()
            );
        }
    }
}
