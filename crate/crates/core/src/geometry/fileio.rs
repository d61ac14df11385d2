//! Loading domain descriptions from key=value text files, with boundary
//! point clouds in a small binary format (count, then d·count little-endian
//! f64 coordinates).

use super::{
    BoxRegion, BuiltinDomain, ClaimedParams, DomainSpec, InsideKind, OracleKind, PointCloud,
    SetDesc,
};
use crate::SobexError;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// A domain loaded from disk: either a full 2D analysis domain or a bare
/// 3D target cloud (supported for decomposition runs only).
pub enum LoadedDomain {
    Dim2(DomainSpec),
    Dim3 {
        name: String,
        window: BoxRegion<3>,
        cloud: Arc<PointCloud<3>>,
        h_b: f64,
    },
}

pub fn read_point_file<const D: usize>(path: &Path) -> Result<Vec<[f64; D]>, SobexError> {
    let mut file = std::fs::File::open(path)?;
    let mut buf = [0u8; 8];
    file.read_exact(&mut buf)
        .map_err(|_| SobexError::DomainFile(format!("{}: truncated header", path.display())))?;
    let count = u64::from_le_bytes(buf) as usize;
    if count == 0 || count > 100_000_000 {
        return Err(SobexError::DomainFile(format!(
            "{}: unreasonable point count {count}",
            path.display()
        )));
    }
    let mut data = vec![0u8; count * D * 8];
    file.read_exact(&mut data)
        .map_err(|_| SobexError::DomainFile(format!("{}: truncated point data", path.display())))?;
    let mut pts = Vec::with_capacity(count);
    for c in 0..count {
        let mut p = [0.0; D];
        for (i, coord) in p.iter_mut().enumerate() {
            let off = (c * D + i) * 8;
            *coord = f64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        }
        pts.push(p);
    }
    Ok(pts)
}

pub fn write_point_file<const D: usize>(path: &Path, pts: &[[f64; D]]) -> Result<(), SobexError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(&(pts.len() as u64).to_le_bytes())?;
    for p in pts {
        for coord in p {
            file.write_all(&coord.to_le_bytes())?;
        }
    }
    Ok(())
}

fn parse_kv(text: &str) -> Result<HashMap<String, String>, SobexError> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(SobexError::DomainFile(format!(
                "line {}: expected key = value, got {line:?}",
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get_f64(map: &HashMap<String, String>, key: &str) -> Result<Option<f64>, SobexError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) if v == "inf" => Ok(Some(f64::INFINITY)),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| SobexError::DomainFile(format!("{key}: not a number: {v:?}"))),
    }
}

fn cloud_from_key<const D: usize>(
    map: &HashMap<String, String>,
    key: &str,
    base: &Path,
    h_b: f64,
) -> Result<Option<Arc<PointCloud<D>>>, SobexError> {
    let Some(rel) = map.get(key) else {
        return Ok(None);
    };
    let path: PathBuf = if Path::new(rel).is_absolute() {
        rel.into()
    } else {
        base.join(rel)
    };
    let pts = read_point_file::<D>(&path)?;
    Ok(Some(Arc::new(PointCloud::new(pts, h_b))))
}

/// Parse a domain description file. Relative point-file paths resolve
/// against the directory containing the description.
pub fn load_domain(path: &Path) -> Result<LoadedDomain, SobexError> {
    let text = std::fs::read_to_string(path)?;
    let map = parse_kv(&text)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let dim = get_f64(&map, "dim")?.unwrap_or(2.0) as usize;
    let kind = map
        .get("kind")
        .ok_or_else(|| SobexError::DomainFile("missing key: kind".into()))?
        .as_str();

    let claimed = match get_f64(&map, "claimed_eps")? {
        Some(eps) => Some(ClaimedParams {
            eps,
            delta: get_f64(&map, "claimed_delta")?.unwrap_or(f64::INFINITY),
            qh_bound: get_f64(&map, "claimed_qh")?.unwrap_or(f64::INFINITY),
            lambda: get_f64(&map, "claimed_lambda")?.unwrap_or(1.0),
        }),
        None => None,
    };

    if dim == 3 {
        if kind != "pointcloud" {
            return Err(SobexError::DomainFile(
                "dim=3 supports only kind=pointcloud (decomposition runs)".into(),
            ));
        }
        let h_b = get_f64(&map, "h_b")?.unwrap_or(1e-2);
        let cloud = cloud_from_key::<3>(&map, "points", &base, h_b)?
            .ok_or_else(|| SobexError::DomainFile("dim=3 requires key: points".into()))?;
        let m = get_f64(&map, "m")?.unwrap_or(3.0) as i32;
        let window = match get_f64(&map, "window_lo_x")? {
            Some(_) => BoxRegion::new(
                [
                    get_f64(&map, "window_lo_x")?.unwrap(),
                    get_f64(&map, "window_lo_y")?.unwrap_or(0.0),
                    get_f64(&map, "window_lo_z")?.unwrap_or(0.0),
                ],
                [
                    get_f64(&map, "window_hi_x")?.unwrap_or(0.0),
                    get_f64(&map, "window_hi_y")?.unwrap_or(0.0),
                    get_f64(&map, "window_hi_z")?.unwrap_or(0.0),
                ],
            ),
            None => BoxRegion::symmetric(m),
        };
        let name = map
            .get("name")
            .cloned()
            .unwrap_or_else(|| "cloud3d".to_string());
        return Ok(LoadedDomain::Dim3 {
            name,
            window,
            cloud,
            h_b,
        });
    }
    if dim != 2 {
        return Err(SobexError::DomainFile(format!("unsupported dim: {dim}")));
    }

    let m = get_f64(&map, "m")?.unwrap_or(3.0) as i32;
    let window = match (get_f64(&map, "window_lo_x")?, get_f64(&map, "window_lo_y")?) {
        (Some(lx), Some(ly)) => BoxRegion::new(
            [lx, ly],
            [
                get_f64(&map, "window_hi_x")?.ok_or_else(|| {
                    SobexError::DomainFile("window_hi_x required with window_lo_x".into())
                })?,
                get_f64(&map, "window_hi_y")?.ok_or_else(|| {
                    SobexError::DomainFile("window_hi_y required with window_lo_y".into())
                })?,
            ],
        ),
        _ => BoxRegion::symmetric(m),
    };

    match kind {
        "builtin" => {
            let which = map
                .get("builtin")
                .ok_or_else(|| SobexError::DomainFile("kind=builtin requires key: builtin".into()))?;
            let mut b = BuiltinDomain::parse(which).ok_or_else(|| {
                SobexError::DomainFile(format!("unknown builtin: {which:?}"))
            })?;
            // parameter overrides
            match &mut b {
                BuiltinDomain::PureDirichletDisk { radius } => {
                    if let Some(r) = get_f64(&map, "radius")? {
                        *radius = r;
                    }
                }
                BuiltinDomain::Sector { theta, .. }
                | BuiltinDomain::SectorComplement { theta }
                | BuiltinDomain::ExteriorCusp { theta } => {
                    if let Some(t) = get_f64(&map, "theta")? {
                        *theta = t;
                    }
                }
                BuiltinDomain::CuspAtZero { alpha } | BuiltinDomain::CuspAtInfinity { alpha } => {
                    if let Some(a) = get_f64(&map, "alpha")? {
                        *alpha = a;
                    }
                }
                BuiltinDomain::HalfPlane { .. } => {}
            }
            let mut dom = b.domain_with_window(m);
            dom.window = window;
            if claimed.is_some() {
                dom.claimed = claimed;
            }
            if let Some(h_b) = get_f64(&map, "h_b")? {
                if map.get("oracle").map(|s| s.as_str()) == Some("sampled") {
                    dom = super::sampled_variant(&dom, h_b);
                }
            }
            Ok(LoadedDomain::Dim2(dom))
        }
        "pointcloud" => {
            let h_b = get_f64(&map, "h_b")?.unwrap_or(1e-2);
            let gamma = match cloud_from_key::<2>(&map, "gamma_points", &base, h_b)? {
                Some(c) => SetDesc::Cloud(c),
                None => SetDesc::Empty,
            };
            let dpart = match cloud_from_key::<2>(&map, "d_points", &base, h_b)? {
                Some(c) => SetDesc::Cloud(c),
                None => SetDesc::Empty,
            };
            if gamma.is_empty() && dpart.is_empty() {
                return Err(SobexError::DomainFile(
                    "pointcloud domain needs gamma_points and/or d_points".into(),
                ));
            }
            let poly = cloud_from_key::<2>(&map, "inside_polygon", &base, h_b)?.ok_or_else(
                || SobexError::DomainFile("pointcloud domain needs inside_polygon".into()),
            )?;
            let name = map
                .get("name")
                .cloned()
                .unwrap_or_else(|| "pointcloud".to_string());
            Ok(LoadedDomain::Dim2(DomainSpec {
                name,
                builtin: None,
                window,
                oracle_kind: OracleKind::SampledBoundary { h_b },
                inside_kind: InsideKind::Polygon {
                    pts: Arc::new(poly.points.clone()),
                },
                gamma,
                dpart,
                claimed,
            }))
        }
        other => Err(SobexError::DomainFile(format!("unknown kind: {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{HalfPlaneSplit, SectorOuter};

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("sobex-fileio-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn point_file_round_trip() {
        let dir = tmpdir("roundtrip");
        let path = dir.join("pts.bin");
        let pts = vec![[0.0, 1.5], [-2.25, 3.0], [1e-9, -4.0]];
        write_point_file(&path, &pts).unwrap();
        let back = read_point_file::<2>(&path).unwrap();
        assert_eq!(pts, back);
    }

    #[test]
    fn builtin_file_with_overrides() {
        let dir = tmpdir("builtin");
        let path = dir.join("dom.txt");
        std::fs::write(
            &path,
            "kind = builtin\nbuiltin = sector\ntheta = 0.5\nm = 2\nclaimed_eps = 0.04\nclaimed_delta = inf\n",
        )
        .unwrap();
        let LoadedDomain::Dim2(dom) = load_domain(&path).unwrap() else {
            panic!("expected 2d domain");
        };
        match dom.builtin {
            Some(BuiltinDomain::Sector { theta, outer }) => {
                assert!((theta - 0.5).abs() < 1e-15);
                assert_eq!(outer, SectorOuter::HalfPlane);
            }
            other => panic!("wrong builtin: {other:?}"),
        }
        assert_eq!(dom.window.hi, [4.0, 4.0]);
        assert!((dom.claimed.unwrap().eps - 0.04).abs() < 1e-15);
        assert!(dom.claimed.unwrap().delta.is_infinite());
    }

    #[test]
    fn pointcloud_file_cross_validates_against_analytic() {
        use rand::{Rng, SeedableRng};
        let dir = tmpdir("cloud");
        let h_b = 2e-3;
        let analytic = BuiltinDomain::HalfPlane {
            split: HalfPlaneSplit::PositiveGamma,
        }
        .domain();
        let sampled = crate::geometry::sampled_variant(&analytic, h_b);
        let (SetDesc::Cloud(g), SetDesc::Cloud(d)) = (&sampled.gamma, &sampled.dpart) else {
            panic!("sampling failed");
        };
        write_point_file(&dir.join("g.bin"), &g.points).unwrap();
        write_point_file(&dir.join("d.bin"), &d.points).unwrap();
        // inside polygon: a big box approximating the lower half-plane window
        let poly = vec![[-8.0, -8.0], [8.0, -8.0], [8.0, 0.0], [-8.0, 0.0]];
        write_point_file(&dir.join("poly.bin"), &poly).unwrap();
        std::fs::write(
            dir.join("dom.txt"),
            format!(
                "kind = pointcloud\nname = hp-cloud\nh_b = {h_b}\ngamma_points = g.bin\nd_points = d.bin\ninside_polygon = poly.bin\n"
            ),
        )
        .unwrap();
        let LoadedDomain::Dim2(dom) = load_domain(&dir.join("dom.txt")).unwrap() else {
            panic!("expected 2d domain");
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..400 {
            let p = [rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)];
            assert!(
                (dom.dist_gamma(p) - analytic.dist_gamma(p)).abs() <= h_b,
                "gamma at {p:?}"
            );
            assert!(
                (dom.dist_d(p) - analytic.dist_d(p)).abs() <= h_b,
                "dpart at {p:?}"
            );
        }
        // interior probe away from the snapped polygon edge
        assert!(dom.inside([0.0, -1.0]));
        assert!(!dom.inside([0.0, 1.0]));
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tmpdir("bad");
        let path = dir.join("bad.txt");
        std::fs::write(&path, "builtin = sector\n").unwrap();
        assert!(matches!(
            load_domain(&path),
            Err(SobexError::DomainFile(_))
        ));
        std::fs::write(&path, "kind = builtin\nbuiltin = nonsense\n").unwrap();
        assert!(load_domain(&path).is_err());
    }

    #[test]
    fn dim3_cloud_loads() {
        let dir = tmpdir("d3");
        let pts: Vec<[f64; 3]> = (0..50)
            .map(|i| {
                let t = i as f64 / 49.0 * 4.0 - 2.0;
                [t, 0.0, 0.0]
            })
            .collect();
        write_point_file(&dir.join("axis.bin"), &pts).unwrap();
        std::fs::write(
            dir.join("dom.txt"),
            "kind = pointcloud\ndim = 3\npoints = axis.bin\nh_b = 0.1\nm = 1\n",
        )
        .unwrap();
        let LoadedDomain::Dim3 { window, cloud, .. } = load_domain(&dir.join("dom.txt")).unwrap()
        else {
            panic!("expected 3d domain");
        };
        assert_eq!(window.hi, [2.0, 2.0, 2.0]);
        // grid-indexed nearest must agree with brute force
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let q = [
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ];
            let brute = pts
                .iter()
                .map(|p| crate::util::dist(*p, q))
                .fold(f64::INFINITY, f64::min);
            assert!((cloud.dist(q) - brute).abs() < 1e-12, "at {q:?}");
        }
    }
}
