//! Tariff-to-grid-region mapping: ZIP code to coordinates through a
//! gazetteer, coordinates to region through point-in-polygon tests.
//!
//! Geometry is planar lon/lat with the even-odd (ray casting) rule; the
//! service territories involved are continental-scale, so no spherical
//! correction is applied.

use std::collections::HashMap;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("zip '{0}' not found in gazetteer")]
    ZipNotFound(String),
    #[error("gazetteer row {row}: {detail}")]
    BadGazetteerRow { row: usize, detail: String },
    #[error("geojson: {0}")]
    BadGeoJson(String),
    #[error("region '{name}': {detail}")]
    BadRegion { name: String, detail: String },
    #[error("duplicate region name '{0}'")]
    DuplicateRegion(String),
}

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

/// A named region as a set of closed rings of (lon, lat) vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub rings: Vec<Vec<(f64, f64)>>,
}

/// Ordered set of named regions; order breaks ties for overlapping shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub regions: Vec<Region>,
}

/// Label returned when no region contains a point.
pub const OTHER_REGION: &str = "Other";

/// A point within this distance (degrees) of a ring edge gets a boundary
/// flag: the assignment is numerically unstable there.
pub const BOUNDARY_EPS_DEG: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAssignment {
    pub region: String,
    pub boundary: bool,
}

#[derive(Deserialize)]
struct GeoJsonRoot {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<GeoJsonFeature>,
}

#[derive(Deserialize)]
struct GeoJsonFeature {
    properties: serde_json::Map<String, serde_json::Value>,
    geometry: GeoJsonGeometry,
}

#[derive(Deserialize)]
struct GeoJsonGeometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: serde_json::Value,
}

fn parse_ring(value: &serde_json::Value, name: &str) -> Result<Vec<(f64, f64)>, GeoError> {
    let arr = value.as_array().ok_or_else(|| GeoError::BadRegion {
        name: name.to_string(),
        detail: "ring is not an array".into(),
    })?;
    let mut ring = Vec::with_capacity(arr.len());
    for v in arr {
        let pair = v.as_array().ok_or_else(|| GeoError::BadRegion {
            name: name.to_string(),
            detail: "vertex is not an array".into(),
        })?;
        if pair.len() < 2 {
            return Err(GeoError::BadRegion {
                name: name.to_string(),
                detail: "vertex has fewer than 2 coordinates".into(),
            });
        }
        let lon = pair[0].as_f64().ok_or_else(|| GeoError::BadRegion {
            name: name.to_string(),
            detail: "longitude is not a number".into(),
        })?;
        let lat = pair[1].as_f64().ok_or_else(|| GeoError::BadRegion {
            name: name.to_string(),
            detail: "latitude is not a number".into(),
        })?;
        ring.push((lon, lat));
    }
    if ring.len() < 4 {
        return Err(GeoError::BadRegion {
            name: name.to_string(),
            detail: format!("ring has {} vertices, need at least 4", ring.len()),
        });
    }
    if ring.first() != ring.last() {
        return Err(GeoError::BadRegion {
            name: name.to_string(),
            detail: "ring is not closed (first vertex != last)".into(),
        });
    }
    Ok(ring)
}

impl RegionSet {
    /// Parse a GeoJSON FeatureCollection of Polygon/MultiPolygon features;
    /// the region name comes from the `NAME` property.
    pub fn from_geojson(text: &str) -> Result<Self, GeoError> {
        let root: GeoJsonRoot =
            serde_json::from_str(text).map_err(|e| GeoError::BadGeoJson(e.to_string()))?;
        if root.kind != "FeatureCollection" {
            return Err(GeoError::BadGeoJson(format!(
                "expected FeatureCollection, got '{}'",
                root.kind
            )));
        }
        let mut regions = Vec::new();
        let mut seen: HashMap<String, ()> = HashMap::new();
        for feature in &root.features {
            let name = feature
                .properties
                .get("NAME")
                .and_then(|v| v.as_str())
                .ok_or_else(|| GeoError::BadGeoJson("feature missing 'NAME' property".into()))?
                .to_string();
            if seen.insert(name.clone(), ()).is_some() {
                return Err(GeoError::DuplicateRegion(name));
            }
            let mut rings = Vec::new();
            match feature.geometry.kind.as_str() {
                "Polygon" => {
                    let polys = feature.geometry.coordinates.as_array().ok_or_else(|| {
                        GeoError::BadRegion {
                            name: name.clone(),
                            detail: "Polygon coordinates are not an array".into(),
                        }
                    })?;
                    for ring in polys {
                        rings.push(parse_ring(ring, &name)?);
                    }
                }
                "MultiPolygon" => {
                    let multi = feature.geometry.coordinates.as_array().ok_or_else(|| {
                        GeoError::BadRegion {
                            name: name.clone(),
                            detail: "MultiPolygon coordinates are not an array".into(),
                        }
                    })?;
                    for poly in multi {
                        let poly = poly.as_array().ok_or_else(|| GeoError::BadRegion {
                            name: name.clone(),
                            detail: "polygon is not an array".into(),
                        })?;
                        for ring in poly {
                            rings.push(parse_ring(ring, &name)?);
                        }
                    }
                }
                other => {
                    return Err(GeoError::BadRegion {
                        name,
                        detail: format!("unsupported geometry type '{other}'"),
                    })
                }
            }
            if rings.is_empty() {
                return Err(GeoError::BadRegion {
                    name,
                    detail: "feature has no rings".into(),
                });
            }
            regions.push(Region { name, rings });
        }
        Ok(Self { regions })
    }
}

/// ZIP code to (latitude, longitude) lookup table.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    coords: HashMap<String, GeoPoint>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, zip: &str, lat: f64, lon: f64) {
        self.coords.insert(zip.to_string(), GeoPoint { lat, lon });
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Parse a `zip,latitude,longitude` CSV.
    pub fn from_csv(text: &str) -> Result<Self, GeoError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| GeoError::BadGazetteerRow {
                row: 1,
                detail: e.to_string(),
            })?
            .clone();
        let col = |name: &str| -> Result<usize, GeoError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| GeoError::BadGazetteerRow {
                    row: 1,
                    detail: format!("missing '{name}' column"),
                })
        };
        let zip_col = col("zip")?;
        let lat_col = col("latitude")?;
        let lon_col = col("longitude")?;
        let mut g = Self::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| GeoError::BadGazetteerRow {
                row,
                detail: e.to_string(),
            })?;
            let parse = |idx: usize, what: &str| -> Result<f64, GeoError> {
                record
                    .get(idx)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| GeoError::BadGazetteerRow {
                        row,
                        detail: format!("{what}: {e}"),
                    })
            };
            let lat = parse(lat_col, "latitude")?;
            let lon = parse(lon_col, "longitude")?;
            if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
                return Err(GeoError::BadGazetteerRow {
                    row,
                    detail: format!("coordinates ({lat}, {lon}) out of range"),
                });
            }
            g.insert(record.get(zip_col).unwrap_or(""), lat, lon);
        }
        Ok(g)
    }

    /// Exact lookup; unknown ZIPs are an error so callers can drop the row.
    pub fn zip_to_coords(&self, zip: &str) -> Result<GeoPoint, GeoError> {
        self.coords
            .get(zip)
            .copied()
            .ok_or_else(|| GeoError::ZipNotFound(zip.to_string()))
    }
}

/// Even-odd containment of a point in one closed ring.
fn ring_contains(ring: &[(f64, f64)], lon: f64, lat: f64) -> bool {
    let mut inside = false;
    for edge in ring.windows(2) {
        let (x1, y1) = edge[0];
        let (x2, y2) = edge[1];
        if (y1 > lat) != (y2 > lat) {
            let x_cross = x1 + (lat - y1) / (y2 - y1) * (x2 - x1);
            if lon < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Squared distance from a point to a segment, planar degrees.
fn segment_dist_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (px, py) = p;
    let (ax, ay) = a;
    let (bx, by) = b;
    let dx = bx - ax;
    let dy = by - ay;
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let cx = ax + t * dx - px;
    let cy = ay + t * dy - py;
    cx * cx + cy * cy
}

fn near_any_edge(region: &Region, lon: f64, lat: f64, eps: f64) -> bool {
    let eps_sq = eps * eps;
    region.rings.iter().any(|ring| {
        ring.windows(2)
            .any(|edge| segment_dist_sq((lon, lat), edge[0], edge[1]) <= eps_sq)
    })
}

/// Assign a point to the first region (file order) containing it under the
/// even-odd rule, or [`OTHER_REGION`]. Points within [`BOUNDARY_EPS_DEG`]
/// of any tested ring edge carry a boundary flag.
pub fn assign_region(point: GeoPoint, regions: &RegionSet) -> RegionAssignment {
    let (lon, lat) = (point.lon, point.lat);
    let mut hit: Option<&Region> = None;
    let mut boundary = false;
    for region in &regions.regions {
        if near_any_edge(region, lon, lat, BOUNDARY_EPS_DEG) {
            boundary = true;
        }
        let contained = region.rings.iter().any(|ring| ring_contains(ring, lon, lat));
        if contained {
            match hit {
                None => hit = Some(region),
                Some(first) => log::warn!(
                    "point ({lat}, {lon}) lies in overlapping regions '{}' and '{}'; keeping '{}'",
                    first.name,
                    region.name,
                    first.name
                ),
            }
        }
    }
    RegionAssignment {
        region: hit.map(|r| r.name.clone()).unwrap_or_else(|| OTHER_REGION.to_string()),
        boundary,
    }
}
