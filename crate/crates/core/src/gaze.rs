//! Fixation records, scan paths, bounding-box annotations, and the
//! preprocessing step that turns raw tracker logs into analysable paths.
//!
//! Fixation logs are comma-separated with the header
//! `image_id,subject_id,condition,fix_index,x_px,y_px,onset_ms,duration_ms`.
//! Times are integer milliseconds on disk and seconds in memory.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FIXATION_CSV_HEADER: &str =
    "image_id,subject_id,condition,fix_index,x_px,y_px,onset_ms,duration_ms";

/// The six animal categories counted as targets by default.
pub const ANIMAL_CLASSES: [&str; 6] = ["bird", "cat", "cow", "dog", "horse", "sheep"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "fv")]
    FreeViewing,
    #[serde(rename = "vs")]
    VisualSearch,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::FreeViewing, Condition::VisualSearch];

    pub fn code(self) -> &'static str {
        match self {
            Condition::FreeViewing => "fv",
            Condition::VisualSearch => "vs",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fv" => Ok(Condition::FreeViewing),
            "vs" => Ok(Condition::VisualSearch),
            other => Err(format!("unknown condition {other:?} (expected fv or vs)")),
        }
    }
}

/// A single fixation in image pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fixation<T = f64> {
    pub x: T,
    pub y: T,
    /// Seconds since image onset.
    pub onset: T,
    /// Seconds.
    pub duration: T,
    /// 0-based raw recording order.
    pub index: u32,
}

impl<T: Scalar> Fixation<T> {
    pub fn new(x: T, y: T, onset: T, duration: T) -> Self {
        Fixation {
            x,
            y,
            onset,
            duration,
            index: 0,
        }
    }

    /// A coordinate is valid when finite, non-negative and strictly inside the image.
    pub fn is_valid(&self, width: T, height: T) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.x >= T::zero()
            && self.y >= T::zero()
            && self.x < width
            && self.y < height
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPath<T = f64> {
    pub image_id: String,
    pub subject_id: String,
    pub condition: Condition,
    pub fixations: Vec<Fixation<T>>,
    pub preprocessed: bool,
}

impl<T: Scalar> ScanPath<T> {
    pub fn new(
        image_id: impl Into<String>,
        subject_id: impl Into<String>,
        condition: Condition,
        fixations: Vec<Fixation<T>>,
    ) -> Self {
        ScanPath {
            image_id: image_id.into(),
            subject_id: subject_id.into(),
            condition,
            fixations,
            preprocessed: false,
        }
    }

    /// `image/subject/condition`, used in diagnostics.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.image_id, self.subject_id, self.condition)
    }

    pub fn len(&self) -> usize {
        self.fixations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixations.is_empty()
    }

    /// Preprocessed paths left without fixations are kept for auditing but
    /// skipped by every statistic.
    pub fn is_excluded(&self) -> bool {
        self.preprocessed && self.fixations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox<T = f64> {
    pub class_label: String,
    pub xmin: T,
    pub ymin: T,
    pub xmax: T,
    pub ymax: T,
}

impl<T: Scalar> BoundingBox<T> {
    /// Edge-inclusive containment.
    pub fn contains(&self, x: T, y: T) -> bool {
        x >= self.xmin && x <= self.xmax && y >= self.ymin && y <= self.ymax
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageAnnotation<T = f64> {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<BoundingBox<T>>,
    pub target_classes: BTreeSet<String>,
}

impl<T: Scalar> ImageAnnotation<T> {
    pub fn width_px(&self) -> T {
        T::lit(self.width as f64)
    }

    pub fn height_px(&self) -> T {
        T::lit(self.height as f64)
    }

    pub fn is_target(&self, b: &BoundingBox<T>) -> bool {
        self.target_classes.contains(&b.class_label)
    }

    pub fn targets(&self) -> impl Iterator<Item = &BoundingBox<T>> {
        self.objects.iter().filter(move |b| self.is_target(b))
    }

    pub fn target_count(&self) -> usize {
        self.targets().count()
    }

    /// Distinct target class labels present in the image.
    pub fn target_labels(&self) -> BTreeSet<&str> {
        self.targets().map(|b| b.class_label.as_str()).collect()
    }

    fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Validation {
            image_id: self.image_id.clone(),
            message,
        };
        if self.width == 0 || self.height == 0 {
            return Err(fail(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width_px(), self.height_px());
        for b in &self.objects {
            if !(b.xmin < b.xmax) || !(b.ymin < b.ymax) {
                return Err(fail(format!(
                    "degenerate {} box ({}, {}, {}, {})",
                    b.class_label, b.xmin, b.ymin, b.xmax, b.ymax
                )));
            }
            if b.xmin < T::zero() || b.ymin < T::zero() || b.xmax > w || b.ymax > h {
                return Err(fail(format!(
                    "{} box ({}, {}, {}, {}) exceeds image bounds {}x{}",
                    b.class_label, b.xmin, b.ymin, b.xmax, b.ymax, self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

/// Annotations plus every scan path recorded on them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T = f64> {
    pub annotations: BTreeMap<String, ImageAnnotation<T>>,
    pub scanpaths: Vec<ScanPath<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        annotations: BTreeMap<String, ImageAnnotation<T>>,
        scanpaths: Vec<ScanPath<T>>,
    ) -> Result<Self> {
        if let Some(sp) = scanpaths
            .iter()
            .find(|sp| !annotations.contains_key(&sp.image_id))
        {
            return Err(Error::UnknownImage(sp.image_id.clone()));
        }
        Ok(Dataset {
            annotations,
            scanpaths,
        })
    }

    pub fn load(fixations: &Path, annotations: &Path) -> Result<Self> {
        Self::new(load_annotations(annotations)?, load_fixation_log(fixations)?)
    }

    pub fn annotation(&self, sp: &ScanPath<T>) -> &ImageAnnotation<T> {
        &self.annotations[&sp.image_id]
    }

    /// Preprocesses every raw path. Paths left empty are kept and flagged.
    pub fn preprocessed(&self) -> Result<Self> {
        let scanpaths = self
            .scanpaths
            .iter()
            .map(|sp| {
                if sp.preprocessed {
                    Ok(sp.clone())
                } else {
                    Ok(strip(sp, self.annotation(sp)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            annotations: self.annotations.clone(),
            scanpaths,
        })
    }

    /// Non-excluded paths, in dataset order.
    pub fn active_paths(&self) -> impl Iterator<Item = &ScanPath<T>> {
        self.scanpaths.iter().filter(|sp| !sp.is_excluded())
    }

    pub fn save(&self, fixations: &Path, annotations: &Path) -> Result<()> {
        let mut buf = Vec::new();
        write_fixation_log(&self.scanpaths, &mut buf)?;
        std::fs::write(fixations, buf).map_err(|e| Error::io(fixations, e))?;
        let mut buf = Vec::new();
        write_annotations(self.annotations.values(), &mut buf)?;
        std::fs::write(annotations, buf).map_err(|e| Error::io(annotations, e))
    }
}

/// Drops the first recorded fixation and every invalid-coordinate fixation.
///
/// Returns [`Error::EmptyPath`] when nothing survives; use
/// [`Dataset::preprocessed`] to keep such paths flagged instead.
pub fn preprocess<T: Scalar>(sp: &ScanPath<T>, ann: &ImageAnnotation<T>) -> Result<ScanPath<T>> {
    if sp.preprocessed {
        return Err(Error::AlreadyPreprocessed(sp.label()));
    }
    let out = strip(sp, ann);
    if out.fixations.is_empty() {
        return Err(Error::EmptyPath(sp.label()));
    }
    Ok(out)
}

fn strip<T: Scalar>(sp: &ScanPath<T>, ann: &ImageAnnotation<T>) -> ScanPath<T> {
    let (w, h) = (ann.width_px(), ann.height_px());
    let fixations = sp
        .fixations
        .iter()
        .skip(1)
        .filter(|f| f.is_valid(w, h))
        .copied()
        .collect();
    ScanPath {
        fixations,
        preprocessed: true,
        ..sp.clone()
    }
}

type PathKey = (String, String, Condition);

/// Reads a fixation CSV into one raw scan path per (image, subject, condition),
/// in order of first appearance.
pub fn load_fixation_log<T: Scalar>(path: &Path) -> Result<Vec<ScanPath<T>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_fixation_log(file)
}

pub fn read_fixation_log<T: Scalar, R: Read>(reader: R) -> Result<Vec<ScanPath<T>>> {
    let reader = BufReader::new(reader);
    let mut index: HashMap<PathKey, usize> = HashMap::new();
    let mut seen: HashSet<(usize, u32)> = HashSet::new();
    let mut paths: Vec<ScanPath<T>> = Vec::new();
    let mut header_seen = false;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let header = line.trim_start_matches('\u{feff}');
            if header.trim() != FIXATION_CSV_HEADER {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected header {FIXATION_CSV_HEADER:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let (key, fix) = parse_row::<T>(line, lineno)?;
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            paths.push(ScanPath::new(key.0.clone(), key.1.clone(), key.2, Vec::new()));
            paths.len() - 1
        });
        if !seen.insert((slot, fix.index)) {
            return Err(Error::DuplicateRecord {
                image_id: key.0,
                subject_id: key.1,
                condition: key.2.to_string(),
                fix_index: fix.index,
            });
        }
        paths[slot].fixations.push(fix);
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }

    for sp in &mut paths {
        sp.fixations
            .sort_by(|a, b| a.onset.partial_cmp(&b.onset).unwrap().then(a.index.cmp(&b.index)));
        if let Some(w) = sp.fixations.windows(2).find(|w| w[0].onset >= w[1].onset) {
            return Err(Error::Format(format!(
                "scan path {} has two fixations with onset {} s (indices {} and {})",
                sp.label(),
                w[1].onset,
                w[0].index,
                w[1].index
            )));
        }
    }
    Ok(paths)
}

fn parse_row<T: Scalar>(line: &str, lineno: usize) -> Result<(PathKey, Fixation<T>)> {
    let err = |message: String| Error::Parse {
        line: lineno,
        message,
    };
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.len() != 8 {
        return Err(err(format!("expected 8 columns, found {}", cols.len())));
    }
    if cols[0].is_empty() || cols[1].is_empty() {
        return Err(err("empty image_id or subject_id".into()));
    }
    let condition: Condition = cols[2].parse().map_err(err)?;
    let fix_index: u32 = cols[3]
        .parse()
        .map_err(|_| err(format!("fix_index {:?} is not a non-negative integer", cols[3])))?;
    let real = |name: &str, s: &str| {
        s.parse::<f64>()
            .map_err(|_| err(format!("{name} {s:?} is not numeric")))
    };
    let millis = |name: &str, s: &str| {
        s.parse::<i64>()
            .map_err(|_| err(format!("{name} {s:?} is not an integer")))
    };
    let x = real("x_px", cols[4])?;
    let y = real("y_px", cols[5])?;
    let onset = millis("onset_ms", cols[6])?;
    let duration = millis("duration_ms", cols[7])?;
    if onset < 0 {
        return Err(err(format!("negative onset_ms {onset}")));
    }
    if duration <= 0 {
        return Err(err(format!("duration_ms {duration} must be positive")));
    }
    let fix = Fixation {
        x: T::lit(x),
        y: T::lit(y),
        onset: T::lit(onset as f64 / 1000.0),
        duration: T::lit(duration as f64 / 1000.0),
        index: fix_index,
    };
    Ok((
        (cols[0].to_string(), cols[1].to_string(), condition),
        fix,
    ))
}

fn to_millis<T: Scalar>(seconds: T) -> i64 {
    (seconds.as_f64() * 1000.0).round() as i64
}

pub fn write_fixation_log<T: Scalar, W: Write>(paths: &[ScanPath<T>], mut out: W) -> Result<()> {
    let io = |e| Error::io("<fixation log>", e);
    writeln!(out, "{FIXATION_CSV_HEADER}").map_err(io)?;
    for sp in paths {
        for f in &sp.fixations {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                sp.image_id,
                sp.subject_id,
                sp.condition,
                f.index,
                f.x,
                f.y,
                to_millis(f.onset),
                to_millis(f.duration)
            )
            .map_err(io)?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    class: String,
    xmin: i64,
    ymin: i64,
    xmax: i64,
    ymax: i64,
}

#[derive(Serialize, Deserialize)]
struct RawAnnotation {
    image_id: String,
    width: u32,
    height: u32,
    objects: Vec<RawObject>,
}

/// Loads annotations counting the six animal classes as targets.
pub fn load_annotations<T: Scalar>(path: &Path) -> Result<BTreeMap<String, ImageAnnotation<T>>> {
    let targets = ANIMAL_CLASSES.iter().map(|s| s.to_string()).collect();
    load_annotations_with_targets(path, &targets)
}

pub fn load_annotations_with_targets<T: Scalar>(
    path: &Path,
    targets: &BTreeSet<String>,
) -> Result<BTreeMap<String, ImageAnnotation<T>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, targets)
}

/// Accepts either a top-level JSON array or one JSON object per line.
pub fn parse_annotations<T: Scalar>(
    text: &str,
    targets: &BTreeSet<String>,
) -> Result<BTreeMap<String, ImageAnnotation<T>>> {
    let raw: Vec<RawAnnotation> = if text.trim_start().starts_with('[') {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?
    };

    let mut map = BTreeMap::new();
    for r in raw {
        let ann = ImageAnnotation {
            image_id: r.image_id.clone(),
            width: r.width,
            height: r.height,
            objects: r
                .objects
                .into_iter()
                .map(|o| BoundingBox {
                    class_label: o.class,
                    xmin: T::lit(o.xmin as f64),
                    ymin: T::lit(o.ymin as f64),
                    xmax: T::lit(o.xmax as f64),
                    ymax: T::lit(o.ymax as f64),
                })
                .collect(),
            target_classes: targets.clone(),
        };
        ann.validate()?;
        if map.insert(r.image_id.clone(), ann).is_some() {
            return Err(Error::Validation {
                image_id: r.image_id,
                message: "duplicate image_id".into(),
            });
        }
    }
    Ok(map)
}

/// Writes annotations as JSON lines.
pub fn write_annotations<'a, T: Scalar, W: Write>(
    anns: impl IntoIterator<Item = &'a ImageAnnotation<T>>,
    mut out: W,
) -> Result<()> {
    for a in anns {
        let raw = RawAnnotation {
            image_id: a.image_id.clone(),
            width: a.width,
            height: a.height,
            objects: a
                .objects
                .iter()
                .map(|b| RawObject {
                    class: b.class_label.clone(),
                    xmin: b.xmin.as_f64().round() as i64,
                    ymin: b.ymin.as_f64().round() as i64,
                    xmax: b.xmax.as_f64().round() as i64,
                    ymax: b.ymax.as_f64().round() as i64,
                })
                .collect(),
        };
        let line = serde_json::to_string(&raw).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io("<annotations>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(w: u32, h: u32) -> ImageAnnotation<f64> {
        ImageAnnotation {
            image_id: "img".into(),
            width: w,
            height: h,
            objects: vec![],
            target_classes: BTreeSet::new(),
        }
    }

    fn path(points: &[(f64, f64)]) -> ScanPath<f64> {
        let fixations = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Fixation {
                index: i as u32,
                ..Fixation::new(x, y, 0.1 * i as f64, 0.2)
            })
            .collect();
        ScanPath::new("img", "s1", Condition::FreeViewing, fixations)
    }

    fn coords(sp: &ScanPath<f64>) -> Vec<(f64, f64)> {
        sp.fixations.iter().map(|f| (f.x, f.y)).collect()
    }

    #[test]
    fn two_row_log_gives_one_path() {
        let csv = format!("{FIXATION_CSV_HEADER}\nimg1,s1,fv,1,20,30,400,250\nimg1,s1,fv,0,10,10,100,200\n");
        let paths: Vec<ScanPath<f64>> = read_fixation_log(csv.as_bytes()).unwrap();
        assert_eq!(paths.len(), 1);
        let sp = &paths[0];
        assert_eq!(sp.len(), 2);
        assert!(!sp.preprocessed);
        assert_eq!(sp.fixations[0].index, 0);
        assert_eq!(sp.fixations[0].onset, 0.1);
        assert_eq!(sp.fixations[1].duration, 0.25);
    }

    #[test]
    fn header_only_is_empty() {
        let paths: Vec<ScanPath<f64>> =
            read_fixation_log(format!("{FIXATION_CSV_HEADER}\n").as_bytes()).unwrap();
        assert!(paths.is_empty());
    }

    #[test]
    fn non_numeric_field_names_line() {
        let csv = format!("{FIXATION_CSV_HEADER}\nimg1,s1,fv,0,10,10,100,200\nimg1,s1,fv,1,abc,10,300,200\n");
        match read_fixation_log::<f64, _>(csv.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_column_count_is_parse_error() {
        let csv = format!("{FIXATION_CSV_HEADER}\nimg1,s1,fv,0,10,10,100\n");
        assert!(matches!(
            read_fixation_log::<f64, _>(csv.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_record_rejected() {
        let csv = format!("{FIXATION_CSV_HEADER}\nimg1,s1,vs,0,10,10,100,200\nimg1,s1,vs,0,11,11,300,200\n");
        assert!(matches!(
            read_fixation_log::<f64, _>(csv.as_bytes()),
            Err(Error::DuplicateRecord { fix_index: 0, .. })
        ));
    }

    #[test]
    fn preprocess_drops_first_fixation() {
        let out = preprocess(&path(&[(10., 10.), (20., 20.), (30., 30.)]), &ann(100, 100)).unwrap();
        assert_eq!(coords(&out), vec![(20., 20.), (30., 30.)]);
        assert!(out.preprocessed);
    }

    #[test]
    fn preprocess_drops_invalid() {
        let out = preprocess(&path(&[(10., 10.), (-1., -1.), (30., 30.)]), &ann(100, 100)).unwrap();
        assert_eq!(coords(&out), vec![(30., 30.)]);
        // off-image and non-finite coordinates are invalid too
        let out = preprocess(
            &path(&[(1., 1.), (100., 5.), (5., f64::NAN), (5., 99.9)]),
            &ann(100, 100),
        )
        .unwrap();
        assert_eq!(coords(&out), vec![(5., 99.9)]);
    }

    #[test]
    fn preprocess_single_fixation_signals_empty() {
        assert!(matches!(
            preprocess(&path(&[(10., 10.)]), &ann(100, 100)),
            Err(Error::EmptyPath(_))
        ));
    }

    #[test]
    fn preprocess_twice_is_state_error() {
        let once = preprocess(&path(&[(1., 1.), (2., 2.)]), &ann(10, 10)).unwrap();
        assert!(matches!(
            preprocess(&once, &ann(10, 10)),
            Err(Error::AlreadyPreprocessed(_))
        ));
    }

    #[test]
    fn annotations_target_count() {
        let text = r#"{"image_id":"a","width":100,"height":80,"objects":[
            {"class":"dog","xmin":1,"ymin":1,"xmax":10,"ymax":10},
            {"class":"cat","xmin":1,"ymin":1,"xmax":10,"ymax":10},
            {"class":"sheep","xmin":1,"ymin":1,"xmax":10,"ymax":10},
            {"class":"person","xmin":1,"ymin":1,"xmax":10,"ymax":10}]}"#
            .replace('\n', "");
        let targets = ANIMAL_CLASSES.iter().map(|s| s.to_string()).collect();
        let map = parse_annotations::<f64>(&text, &targets).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map["a"].target_count(), 3);
    }

    #[test]
    fn annotations_array_form_and_validation() {
        let targets = BTreeSet::new();
        let ok = r#"[{"image_id":"a","width":100,"height":80,"objects":[{"class":"dog","xmin":1,"ymin":1,"xmax":10,"ymax":10}]}]"#;
        assert_eq!(parse_annotations::<f64>(ok, &targets).unwrap().len(), 1);

        let wide = r#"{"image_id":"b","width":100,"height":80,"objects":[{"class":"dog","xmin":1,"ymin":1,"xmax":101,"ymax":10}]}"#;
        match parse_annotations::<f64>(wide, &targets) {
            Err(Error::Validation { image_id, .. }) => assert_eq!(image_id, "b"),
            other => panic!("{other:?}"),
        }
        let flipped = r#"{"image_id":"c","width":100,"height":80,"objects":[{"class":"dog","xmin":10,"ymin":1,"xmax":10,"ymax":10}]}"#;
        assert!(matches!(
            parse_annotations::<f64>(flipped, &targets),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn dataset_rejects_unknown_image() {
        let sp = path(&[(1., 1.)]);
        assert!(matches!(
            Dataset::new(BTreeMap::new(), vec![sp]),
            Err(Error::UnknownImage(_))
        ));
    }
}
