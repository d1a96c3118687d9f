//! Point cloud (PLY, XYZ) and annotation/detection (JSON) files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Detection, ObjectAnnotation, Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyBinary,
    /// Binary PLY with double-precision coordinates, lossless for any cloud.
    PlyBinaryDouble,
    PlyAscii,
    Xyz,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> CloudFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => CloudFormat::PlyBinary,
            _ => CloudFormat::Xyz,
        }
    }
}

/// Loads a PLY (ASCII or binary, any endianness) or whitespace-separated XYZ file.
pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n") {
        ply::parse(path, &bytes)
    } else {
        parse_xyz(path, &bytes)
    }
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = match format {
        CloudFormat::PlyBinary => ply::write(&mut w, cloud, true),
        CloudFormat::PlyBinaryDouble => ply::write_double(&mut w, cloud),
        CloudFormat::PlyAscii => ply::write(&mut w, cloud, false),
        CloudFormat::Xyz => write_xyz(&mut w, cloud),
    };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(path, format!("byte {}", e.valid_up_to()), "not UTF-8 text"))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("line {}", lineno + 1);
        let mut fields = line.split_whitespace();
        let mut xyz = [0.0; 3];
        for v in xyz.iter_mut() {
            let tok = fields
                .next()
                .ok_or_else(|| Error::parse(path, loc(), "expected 3 coordinates"))?;
            *v = parse_finite(tok).ok_or_else(|| {
                Error::parse(path, loc(), format!("`{tok}` is not a finite number"))
            })?;
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(PointCloud::from_points_unchecked(points))
}

fn parse_finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn write_xyz(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    for p in cloud {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

mod ply {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq)]
    enum Encoding {
        Ascii,
        BinaryLe,
        BinaryBe,
    }

    #[derive(Debug, Clone, Copy, PartialEq)]
    enum Scalar {
        I8,
        U8,
        I16,
        U16,
        I32,
        U32,
        F32,
        F64,
    }

    impl Scalar {
        fn parse(s: &str) -> Option<Scalar> {
            Some(match s {
                "char" | "int8" => Scalar::I8,
                "uchar" | "uint8" => Scalar::U8,
                "short" | "int16" => Scalar::I16,
                "ushort" | "uint16" => Scalar::U16,
                "int" | "int32" => Scalar::I32,
                "uint" | "uint32" => Scalar::U32,
                "float" | "float32" => Scalar::F32,
                "double" | "float64" => Scalar::F64,
                _ => return None,
            })
        }

        fn size(self) -> usize {
            match self {
                Scalar::I8 | Scalar::U8 => 1,
                Scalar::I16 | Scalar::U16 => 2,
                Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
                Scalar::F64 => 8,
            }
        }

        fn read(self, b: &[u8], le: bool) -> f64 {
            macro_rules! rd {
                ($t:ty, $n:expr) => {{
                    let arr: [u8; $n] = b[..$n].try_into().unwrap();
                    (if le { <$t>::from_le_bytes(arr) } else { <$t>::from_be_bytes(arr) }) as f64
                }};
            }
            match self {
                Scalar::I8 => b[0] as i8 as f64,
                Scalar::U8 => b[0] as f64,
                Scalar::I16 => rd!(i16, 2),
                Scalar::U16 => rd!(u16, 2),
                Scalar::I32 => rd!(i32, 4),
                Scalar::U32 => rd!(u32, 4),
                Scalar::F32 => rd!(f32, 4),
                Scalar::F64 => rd!(f64, 8),
            }
        }
    }

    #[derive(Debug, Clone)]
    enum Property {
        Scalar(String, Scalar),
        List(Scalar, Scalar),
    }

    #[derive(Debug, Clone)]
    struct Element {
        name: String,
        count: usize,
        props: Vec<Property>,
    }

    struct Header {
        encoding: Encoding,
        elements: Vec<Element>,
        body_offset: usize,
        body_line: usize,
    }

    fn parse_header(path: &Path, bytes: &[u8]) -> Result<Header> {
        let mut offset = 0;
        let mut lineno = 0;
        let mut encoding = None;
        let mut elements: Vec<Element> = Vec::new();
        loop {
            let rest = &bytes[offset..];
            let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| {
                Error::parse(path, format!("line {}", lineno + 1), "unterminated header")
            })?;
            lineno += 1;
            let line = std::str::from_utf8(&rest[..end])
                .map_err(|_| Error::parse(path, format!("line {lineno}"), "header is not text"))?
                .trim_end_matches('\r')
                .trim();
            offset += end + 1;
            let loc = format!("line {lineno}");
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["ply"] if lineno == 1 => {}
                ["format", fmt, _version] => {
                    encoding = Some(match *fmt {
                        "ascii" => Encoding::Ascii,
                        "binary_little_endian" => Encoding::BinaryLe,
                        "binary_big_endian" => Encoding::BinaryBe,
                        other => {
                            return Err(Error::parse(path, loc, format!("unknown format `{other}`")))
                        }
                    })
                }
                ["comment", ..] | ["obj_info", ..] | [] => {}
                ["element", name, count] => {
                    let count = count
                        .parse()
                        .map_err(|_| Error::parse(path, loc.clone(), "bad element count"))?;
                    elements.push(Element {
                        name: name.to_string(),
                        count,
                        props: Vec::new(),
                    });
                }
                ["property", "list", ct, it, _name] => {
                    let el = elements
                        .last_mut()
                        .ok_or_else(|| Error::parse(path, loc.clone(), "property before element"))?;
                    let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                        return Err(Error::parse(path, loc, "unknown list property type"));
                    };
                    el.props.push(Property::List(ct, it));
                }
                ["property", ty, name] => {
                    let el = elements
                        .last_mut()
                        .ok_or_else(|| Error::parse(path, loc.clone(), "property before element"))?;
                    let ty = Scalar::parse(ty).ok_or_else(|| {
                        Error::parse(path, loc.clone(), format!("unknown property type `{ty}`"))
                    })?;
                    el.props.push(Property::Scalar(name.to_string(), ty));
                }
                ["end_header"] => break,
                _ => return Err(Error::parse(path, loc, format!("unexpected header line `{line}`"))),
            }
        }
        let encoding =
            encoding.ok_or_else(|| Error::parse(path, "header", "missing format line"))?;
        Ok(Header {
            encoding,
            elements,
            body_offset: offset,
            body_line: lineno,
        })
    }

    fn xyz_slots(path: &Path, el: &Element) -> Result<[usize; 3]> {
        let find = |axis: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(n, _) if n == axis))
                .ok_or_else(|| {
                    Error::parse(path, "header", format!("vertex element lacks property `{axis}`"))
                })
        };
        Ok([find("x")?, find("y")?, find("z")?])
    }

    pub(super) fn parse(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
        let header = parse_header(path, bytes)?;
        let body = &bytes[header.body_offset..];
        match header.encoding {
            Encoding::Ascii => parse_ascii(path, &header, body),
            Encoding::BinaryLe => parse_binary(path, &header, body, true),
            Encoding::BinaryBe => parse_binary(path, &header, body, false),
        }
    }

    fn finite_point(path: &Path, loc: impl Fn() -> String, v: [f64; 3]) -> Result<Point3> {
        if v.iter().all(|c| c.is_finite()) {
            Ok(Point3::new(v[0], v[1], v[2]))
        } else {
            Err(Error::parse(path, loc(), "non-finite coordinate"))
        }
    }

    fn parse_ascii(path: &Path, header: &Header, body: &[u8]) -> Result<PointCloud> {
        let text = std::str::from_utf8(body)
            .map_err(|_| Error::parse(path, "body", "ASCII body is not UTF-8"))?;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (header.body_line + i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut points = Vec::new();
        for el in &header.elements {
            let is_vertex = el.name == "vertex";
            let slots = if is_vertex { Some(xyz_slots(path, el)?) } else { None };
            for _ in 0..el.count {
                let (lineno, line) = lines.next().ok_or_else(|| {
                    Error::parse(path, "end of file", format!("missing `{}` records", el.name))
                })?;
                let Some(slots) = slots else { continue };
                let toks: Vec<&str> = line.split_whitespace().collect();
                let loc = || format!("line {lineno}");
                let mut v = [0.0; 3];
                for (k, &slot) in slots.iter().enumerate() {
                    let tok = toks
                        .get(slot)
                        .ok_or_else(|| Error::parse(path, loc(), "too few values"))?;
                    let bad = || Error::parse(path, loc(), format!("`{tok}` is not a number"));
                    // float properties parse at their declared width
                    v[k] = match &el.props[slot] {
                        Property::Scalar(_, Scalar::F32) => tok.parse::<f32>().map_err(|_| bad())? as f64,
                        _ => tok.parse::<f64>().map_err(|_| bad())?,
                    };
                }
                points.push(finite_point(path, loc, v)?);
            }
            if is_vertex {
                break;
            }
        }
        Ok(PointCloud::from_points_unchecked(points))
    }

    fn parse_binary(path: &Path, header: &Header, body: &[u8], le: bool) -> Result<PointCloud> {
        let mut pos = 0usize;
        let abs = |pos: usize| format!("byte offset {}", header.body_offset + pos);
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            let s = body
                .get(*pos..*pos + n)
                .ok_or_else(|| Error::parse(path, abs(*pos), "unexpected end of binary data"))?;
            *pos += n;
            Ok(s)
        };
        let mut points = Vec::new();
        for el in &header.elements {
            let is_vertex = el.name == "vertex";
            let slots = if is_vertex { Some(xyz_slots(path, el)?) } else { None };
            for _ in 0..el.count {
                let start = pos;
                let mut v = [0.0; 3];
                for (pi, prop) in el.props.iter().enumerate() {
                    match prop {
                        Property::Scalar(_, ty) => {
                            let val = ty.read(take(&mut pos, ty.size())?, le);
                            if let Some(k) = slots.and_then(|s| s.iter().position(|&s| s == pi)) {
                                v[k] = val;
                            }
                        }
                        Property::List(ct, it) => {
                            let n = ct.read(take(&mut pos, ct.size())?, le) as usize;
                            take(&mut pos, n * it.size())?;
                        }
                    }
                }
                if is_vertex {
                    points.push(finite_point(path, || abs(start), v)?);
                }
            }
            if is_vertex {
                break;
            }
        }
        Ok(PointCloud::from_points_unchecked(points))
    }

    pub(super) fn write_double(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            cloud.len()
        )?;
        for p in cloud {
            for c in [p.x, p.y, p.z] {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub(super) fn write(w: &mut impl Write, cloud: &PointCloud, binary: bool) -> std::io::Result<()> {
        let fmt = if binary { "binary_little_endian" } else { "ascii" };
        write!(
            w,
            "ply\nformat {fmt} 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
            cloud.len()
        )?;
        for p in cloud {
            let v = [p.x as f32, p.y as f32, p.z as f32];
            if binary {
                for c in v {
                    w.write_all(&c.to_le_bytes())?;
                }
            } else {
                writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
            }
        }
        Ok(())
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            path,
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Data(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<ObjectAnnotation>> {
    load_json(path.as_ref())
}

pub fn save_annotations(annotations: &[ObjectAnnotation], path: impl AsRef<Path>) -> Result<()> {
    save_json(annotations, path.as_ref())
}

/// Loads detections. Records without a `score` (plain annotation files) get 1.0.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Record {
        class: crate::types::ObjectClass,
        center: [f64; 3],
        yaw: f64,
        #[serde(default = "unit_score")]
        score: f64,
    }
    fn unit_score() -> f64 {
        1.0
    }
    let path = path.as_ref();
    let records: Vec<Record> = load_json(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if !(r.score.is_finite() && r.score > 0.0) {
                return Err(Error::parse(
                    path,
                    format!("record {i}"),
                    format!("score must be finite and positive, got {}", r.score),
                ));
            }
            Ok(Detection {
                class: r.class,
                center: r.center,
                yaw: r.yaw,
                score: r.score,
            })
        })
        .collect()
}

pub fn save_detections(detections: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    save_json(detections, path.as_ref())
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ObjectClass;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, name: &str, contents: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn xyz_three_points() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.xyz", b"0 0 0\n1 0 0\n0 1 0\n");
        let c = load_cloud(&p).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.points()[1], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn xyz_nan_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.xyz", b"0 0 0\n1 2 NaN\n");
        match load_cloud(&p) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ply_with_zero_vertices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "e.ply",
            b"ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        );
        assert!(load_cloud(&p).unwrap().is_empty());
    }

    #[test]
    fn malformed_ply_header_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "b.ply", b"ply\nformat ascii 1.0\nelement vertex 1\nbogus line\nend_header\n0 0 0\n");
        match load_cloud(&p) {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 4"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n".to_vec();
        bytes.extend_from_slice(&[0u8; 16]);
        let p = write(&dir, "t.ply", &bytes);
        let err = load_cloud(&p).unwrap_err().to_string();
        assert!(err.contains("byte offset"), "{err}");
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = b"ply\nformat binary_big_endian 1.0\ncomment test\nelement vertex 2\nproperty double x\nproperty uchar red\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n".to_vec();
        for (x, y, z) in [(1.5f64, 2.5f64, -3.0f64), (4.0, 5.0, 6.0)] {
            bytes.extend_from_slice(&x.to_be_bytes());
            bytes.push(7);
            bytes.extend_from_slice(&y.to_be_bytes());
            bytes.extend_from_slice(&z.to_be_bytes());
        }
        bytes.push(3);
        for i in [0i32, 1, 1] {
            bytes.extend_from_slice(&i.to_be_bytes());
        }
        let p = write(&dir, "f.ply", &bytes);
        let c = load_cloud(&p).unwrap();
        assert_eq!(c.points(), &[Point3::new(1.5, 2.5, -3.0), Point3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn empty_cloud_round_trips_in_every_format() {
        let dir = tempfile::tempdir().unwrap();
        for (i, fmt) in [
            CloudFormat::PlyBinary,
            CloudFormat::PlyBinaryDouble,
            CloudFormat::PlyAscii,
            CloudFormat::Xyz,
        ]
            .into_iter()
            .enumerate()
        {
            let p = dir.path().join(format!("e{i}"));
            save_cloud(&PointCloud::new(), &p, fmt).unwrap();
            assert!(load_cloud(&p).unwrap().is_empty());
        }
    }

    #[test]
    fn binary_round_trip_of_1000_points_is_bit_identical() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let c: PointCloud = (0..1000)
            .map(|_| {
                Point3::new(
                    rng.random_range(-50.0f32..50.0) as f64,
                    rng.random_range(-50.0f32..50.0) as f64,
                    rng.random_range(-5.0f32..5.0) as f64,
                )
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.ply");
        save_cloud(&c, &p, CloudFormat::PlyBinary).unwrap();
        let back = load_cloud(&p).unwrap();
        assert_eq!(back.len(), c.len());
        for (a, b) in c.iter().zip(back.iter()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
    }

    #[test]
    fn double_ply_is_lossless_for_any_f64() {
        let c = PointCloud::from_points(vec![
            Point3::new(0.1, -1e-300, 123456.789012345),
            Point3::new(std::f64::consts::PI, 2.0f64.sqrt(), -0.3),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.ply");
        save_cloud(&c, &p, CloudFormat::PlyBinaryDouble).unwrap();
        assert_eq!(load_cloud(&p).unwrap(), c);
    }

    #[test]
    fn annotation_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let one = vec![ObjectAnnotation::new(ObjectClass::TetrapodB, Point3::new(1.0, 2.0, 0.5), 0.0)];
        save_annotations(&one, &p).unwrap();
        assert_eq!(load_annotations(&p).unwrap(), one);

        save_annotations(&[], &p).unwrap();
        assert!(load_annotations(&p).unwrap().is_empty());

        fs::write(&p, r#"[{"class":"tetrapod_x","center":[0,0,0],"yaw":0}]"#).unwrap();
        let err = load_annotations(&p).unwrap_err().to_string();
        for c in ObjectClass::ALL {
            assert!(err.contains(c.name()), "{err}");
        }
    }

    #[test]
    fn annotation_files_load_as_unit_score_detections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let a = ObjectAnnotation::new(ObjectClass::ReefRing, Point3::new(3.0, 4.0, 0.3), 1.0);
        save_annotations(&[a], &p).unwrap();
        let d = load_detections(&p).unwrap();
        assert_eq!(d, vec![Detection::from(a)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn text_and_binary_round_trips(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0, -10.0f64..10.0), 0..200)
        ) {
            let c: PointCloud = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let dir = tempfile::tempdir().unwrap();
            let xyz = dir.path().join("c.xyz");
            save_cloud(&c, &xyz, CloudFormat::Xyz).unwrap();
            let back = load_cloud(&xyz).unwrap();
            prop_assert_eq!(back.len(), c.len());
            for (a, b) in c.iter().zip(back.iter()) {
                prop_assert!((a - b).abs().max() <= 1e-6);
            }
            // PLY stores float32; exact for f32-representable input.
            let c32: PointCloud = c.iter().map(|p| Point3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64)).collect();
            for fmt in [CloudFormat::PlyBinary, CloudFormat::PlyAscii] {
                let ply = dir.path().join("c.ply");
                save_cloud(&c32, &ply, fmt).unwrap();
                prop_assert_eq!(load_cloud(&ply).unwrap(), c32.clone());
            }
        }

        #[test]
        fn detection_round_trip(
            recs in proptest::collection::vec((0usize..4, -50.0f64..50.0, -50.0f64..50.0, -2.0f64..3.0, 0.0f64..std::f64::consts::TAU, 0.01f64..1.0), 0..20)
        ) {
            let dets: Vec<Detection> = recs.iter().map(|&(c, x, y, z, yaw, s)| Detection {
                class: ObjectClass::ALL[c], center: [x, y, z], yaw, score: s,
            }).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("d.json");
            save_detections(&dets, &p).unwrap();
            prop_assert_eq!(load_detections(&p).unwrap(), dets);
        }
    }
}
