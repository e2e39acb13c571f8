//! Ring-road geometry: a closed polyline parameterized by arc length, with
//! exits and exit-delimited segments.
//!
//! The ring is described by an ordered list of WGS-84 vertices. Arc positions
//! are meters along the polyline, measured from the first vertex in vertex
//! order; by convention that orientation is [`Direction::Clockwise`]. Edge
//! lengths are great-circle (haversine) distances; point projection happens in
//! a local equirectangular tangent plane centered at the ring centroid, which
//! is adequate at city scale.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Mean Earth radius in meters, used by the haversine formula.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default acceptance threshold for snapping exits and map-matching records.
pub const DEFAULT_MAX_OFFSET_M: f64 = 100.0;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("a ring needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("a ring needs at least 2 exits, got {0}")]
    TooFewExits(usize),
    #[error("exit '{label}' is {offset_m:.1} m from the ring (max {max_offset_m:.1} m)")]
    ExitOffRing {
        label: String,
        offset_m: f64,
        max_offset_m: f64,
    },
    #[error("exits '{first}' and '{second}' snap to the same arc position {arc_m:.3} m")]
    DuplicateExitArc {
        first: String,
        second: String,
        arc_m: f64,
    },
    #[error("invalid coordinate lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
}

/// Errors raised while reading geometry or exit files.
#[derive(Debug, Error)]
pub enum GeoFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
}

/// A WGS-84 coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeometryError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(GeometryError::InvalidCoordinate { lat, lon });
        }
        Ok(Self { lat, lon })
    }
}

/// Great-circle distance between two points, in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lon1) = (a.lat.to_radians(), a.lon.to_radians());
    let (lat2, lon2) = (b.lat.to_radians(), b.lon.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Position along the ring, in meters from the origin vertex, in `[0, C)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ArcPosition(pub f64);

impl ArcPosition {
    pub fn meters(self) -> f64 {
        self.0
    }
}

/// Travel orientation on the ring. `Clockwise` is the direction of increasing
/// arc along the vertex order of the input polyline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Clockwise,
    Counterclockwise,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Clockwise => Direction::Counterclockwise,
            Direction::Counterclockwise => Direction::Clockwise,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Clockwise => "cw",
            Direction::Counterclockwise => "ccw",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cw" => Some(Direction::Clockwise),
            "ccw" => Some(Direction::Counterclockwise),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named exit snapped onto the ring. Ids are assigned by increasing arc,
/// starting at 1.
#[derive(Debug, Clone)]
pub struct Exit {
    pub id: u32,
    pub arc: ArcPosition,
    pub label: String,
}

/// One exit-delimited stretch of the ring. Segment `j` starts at exit `j` and
/// runs clockwise to the next exit; intervals are half-open `[start, end)` so
/// a point on an exit belongs to the segment that exit begins. Indices are
/// 1-based.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub index: u32,
    pub start_exit: u32,
    pub end_exit: u32,
    pub start_arc: f64,
    pub length_m: f64,
}

/// Local equirectangular tangent plane used for projections.
#[derive(Debug, Clone, Copy)]
struct TangentPlane {
    lat0_rad: f64,
    lon0_rad: f64,
    cos_lat0: f64,
}

impl TangentPlane {
    fn new(center: GeoPoint) -> Self {
        let lat0_rad = center.lat.to_radians();
        Self {
            lat0_rad,
            lon0_rad: center.lon.to_radians(),
            cos_lat0: lat0_rad.cos(),
        }
    }

    fn to_xy(self, p: GeoPoint) -> (f64, f64) {
        let x = (p.lon.to_radians() - self.lon0_rad) * self.cos_lat0 * EARTH_RADIUS_M;
        let y = (p.lat.to_radians() - self.lat0_rad) * EARTH_RADIUS_M;
        (x, y)
    }

    fn to_geo(self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lat: (self.lat0_rad + y / EARTH_RADIUS_M).to_degrees(),
            lon: (self.lon0_rad + x / (EARTH_RADIUS_M * self.cos_lat0)).to_degrees(),
        }
    }
}

/// The ring: closed vertex loop, arc parameterization, exits and segments.
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct RingGeometry {
    vertices: Vec<GeoPoint>,
    /// Cumulative arc at each vertex; `cumulative_arc[0] == 0`.
    cumulative_arc: Vec<f64>,
    circumference: f64,
    exits: Vec<Exit>,
    segments: Vec<Segment>,
    plane: TangentPlane,
    /// Vertices in tangent-plane coordinates, one entry per vertex.
    planar: Vec<(f64, f64)>,
}

/// Builds the ring from an open vertex loop (the closing edge from last to
/// first vertex is implicit) and a list of labeled exit coordinates.
///
/// Exits are snapped to the nearest point of the polyline and must lie within
/// `max_offset_m` of it. Identical inputs produce bit-identical geometry.
pub fn build_ring(
    vertices: &[GeoPoint],
    exits: &[(String, GeoPoint)],
    max_offset_m: f64,
) -> Result<RingGeometry, GeometryError> {
    let mut verts: Vec<GeoPoint> = vertices.to_vec();
    // Tolerate an explicitly closed input loop.
    if verts.len() > 1 && verts.first() == verts.last() {
        verts.pop();
    }
    if verts.len() < 3 {
        return Err(GeometryError::TooFewVertices(verts.len()));
    }
    if exits.len() < 2 {
        return Err(GeometryError::TooFewExits(exits.len()));
    }
    for v in &verts {
        GeoPoint::new(v.lat, v.lon)?;
    }

    let n = verts.len();
    let mut cumulative_arc = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        cumulative_arc.push(acc);
        let next = verts[(i + 1) % n];
        acc += haversine_m(verts[i], next);
    }
    let circumference = acc;

    let centroid = GeoPoint {
        lat: verts.iter().map(|v| v.lat).sum::<f64>() / n as f64,
        lon: verts.iter().map(|v| v.lon).sum::<f64>() / n as f64,
    };
    let plane = TangentPlane::new(centroid);
    let planar: Vec<(f64, f64)> = verts.iter().map(|v| plane.to_xy(*v)).collect();

    let mut ring = RingGeometry {
        vertices: verts,
        cumulative_arc,
        circumference,
        exits: Vec::new(),
        segments: Vec::new(),
        plane,
        planar,
    };

    let mut snapped: Vec<Exit> = Vec::with_capacity(exits.len());
    for (label, point) in exits {
        let (arc, offset) = ring.arc_position(*point);
        if offset > max_offset_m {
            return Err(GeometryError::ExitOffRing {
                label: label.clone(),
                offset_m: offset,
                max_offset_m,
            });
        }
        snapped.push(Exit {
            id: 0,
            arc,
            label: label.clone(),
        });
    }
    snapped.sort_by(|a, b| a.arc.0.total_cmp(&b.arc.0));
    for i in 0..snapped.len() {
        let next = (i + 1) % snapped.len();
        if i != next && snapped[i].arc.0 == snapped[next].arc.0 {
            return Err(GeometryError::DuplicateExitArc {
                first: snapped[i].label.clone(),
                second: snapped[next].label.clone(),
                arc_m: snapped[i].arc.0,
            });
        }
    }
    for (i, e) in snapped.iter_mut().enumerate() {
        e.id = (i + 1) as u32;
    }

    let count = snapped.len();
    let mut segments = Vec::with_capacity(count);
    for j in 0..count {
        let start = &snapped[j];
        let end = &snapped[(j + 1) % count];
        let length = (end.arc.0 - start.arc.0).rem_euclid(circumference);
        // The wrapping segment: rem_euclid of 0 would collapse it.
        let length = if length == 0.0 { circumference } else { length };
        segments.push(Segment {
            index: (j + 1) as u32,
            start_exit: start.id,
            end_exit: end.id,
            start_arc: start.arc.0,
            length_m: length,
        });
    }

    ring.exits = snapped;
    ring.segments = segments;
    Ok(ring)
}

impl RingGeometry {
    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn exits(&self) -> &[Exit] {
        &self.exits
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn exit_by_id(&self, id: u32) -> Option<&Exit> {
        self.exits.get(id.checked_sub(1)? as usize)
    }

    pub fn segment_by_index(&self, index: u32) -> Option<&Segment> {
        self.segments.get(index.checked_sub(1)? as usize)
    }

    /// Projects `p` onto the ring, returning the arc of the closest polyline
    /// point and the great-circle offset to it. Ties between equally distant
    /// edges resolve to the smaller arc, so the result is deterministic.
    pub fn arc_position(&self, p: GeoPoint) -> (ArcPosition, f64) {
        let (px, py) = self.plane.to_xy(p);
        let n = self.vertices.len();
        let mut best_d2 = f64::INFINITY;
        let mut best_arc = 0.0;
        let mut best_xy = self.planar[0];
        for i in 0..n {
            let (ax, ay) = self.planar[i];
            let (bx, by) = self.planar[(i + 1) % n];
            let (ex, ey) = (bx - ax, by - ay);
            let len2 = ex * ex + ey * ey;
            if len2 == 0.0 {
                continue;
            }
            let t = (((px - ax) * ex + (py - ay) * ey) / len2).clamp(0.0, 1.0);
            let (cx, cy) = (ax + t * ex, ay + t * ey);
            let d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy);
            let edge_len = self.edge_length(i);
            let arc = (self.cumulative_arc[i] + t * edge_len) % self.circumference;
            if d2 < best_d2 || (d2 == best_d2 && arc < best_arc) {
                best_d2 = d2;
                best_arc = arc;
                best_xy = (cx, cy);
            }
        }
        let proj = self.plane.to_geo(best_xy.0, best_xy.1);
        (ArcPosition(best_arc), haversine_m(p, proj))
    }

    fn edge_length(&self, i: usize) -> f64 {
        let n = self.vertices.len();
        if i + 1 < n {
            self.cumulative_arc[i + 1] - self.cumulative_arc[i]
        } else {
            self.circumference - self.cumulative_arc[i]
        }
    }

    /// Geographic point at a given arc position.
    pub fn point_at_arc(&self, arc: ArcPosition) -> GeoPoint {
        let s = arc.0.rem_euclid(self.circumference);
        let i = match self
            .cumulative_arc
            .binary_search_by(|c| c.total_cmp(&s))
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        let len = self.edge_length(i);
        let t = if len > 0.0 {
            ((s - self.cumulative_arc[i]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % self.vertices.len()];
        GeoPoint {
            lat: a.lat + t * (b.lat - a.lat),
            lon: a.lon + t * (b.lon - a.lon),
        }
    }

    /// Meters traveled from `from` to `to` along the given direction.
    /// The result is in `[0, C)`.
    pub fn directed_arc_distance(&self, from: ArcPosition, to: ArcPosition, dir: Direction) -> f64 {
        let delta = match dir {
            Direction::Clockwise => to.0 - from.0,
            Direction::Counterclockwise => from.0 - to.0,
        };
        delta.rem_euclid(self.circumference)
    }

    /// Shorter-way (undirected) ring distance between two arcs.
    pub fn ring_distance(&self, a: ArcPosition, b: ArcPosition) -> f64 {
        let d = self.directed_arc_distance(a, b, Direction::Clockwise);
        d.min(self.circumference - d)
    }

    /// Signed shorter-way arc delta from `from` to `to`: positive means the
    /// clockwise way is shorter. Exact half-ring ties report `+C/2`.
    pub fn signed_arc_delta(&self, from: ArcPosition, to: ArcPosition) -> f64 {
        let cw = self.directed_arc_distance(from, to, Direction::Clockwise);
        if cw <= self.circumference / 2.0 {
            cw
        } else {
            cw - self.circumference
        }
    }

    /// Moves an arc `distance_m` meters in `dir`, wrapping around the ring.
    pub fn advance(&self, arc: ArcPosition, distance_m: f64, dir: Direction) -> ArcPosition {
        let s = match dir {
            Direction::Clockwise => arc.0 + distance_m,
            Direction::Counterclockwise => arc.0 - distance_m,
        };
        ArcPosition(s.rem_euclid(self.circumference))
    }

    /// The 1-based index of the segment whose half-open interval contains `s`.
    pub fn segment_of(&self, s: ArcPosition) -> u32 {
        let s = s.0.rem_euclid(self.circumference);
        let idx = self
            .segments
            .partition_point(|seg| seg.start_arc <= s);
        if idx == 0 {
            // Before the first exit: the wrapping segment that starts at the
            // last exit owns this stretch.
            self.segments.len() as u32
        } else {
            idx as u32
        }
    }

    /// The next exit strictly ahead of `arc` in travel direction `dir`.
    pub fn next_exit(&self, arc: ArcPosition, dir: Direction) -> &Exit {
        match dir {
            Direction::Clockwise => {
                let idx = self.exits.partition_point(|e| e.arc.0 <= arc.0);
                &self.exits[idx % self.exits.len()]
            }
            Direction::Counterclockwise => {
                let idx = self.exits.partition_point(|e| e.arc.0 < arc.0);
                if idx == 0 {
                    self.exits.last().unwrap()
                } else {
                    &self.exits[idx - 1]
                }
            }
        }
    }

    /// The exit reached after passing `count` exits from `arc` in `dir`.
    pub fn exit_ahead(&self, arc: ArcPosition, dir: Direction, count: u32) -> &Exit {
        debug_assert!(count >= 1);
        let first = self.next_exit(arc, dir);
        let pos = (first.id - 1) as i64;
        let n = self.exits.len() as i64;
        let steps = (count - 1) as i64;
        let idx = match dir {
            Direction::Clockwise => (pos + steps).rem_euclid(n),
            Direction::Counterclockwise => (pos - steps).rem_euclid(n),
        };
        &self.exits[idx as usize]
    }
}

fn parse_fields(line: &str) -> Vec<&str> {
    line.split(',').map(|f| f.trim()).collect()
}

/// Reads a geometry file: one `lat,lon` vertex per line, `#` comments and
/// blank lines ignored.
pub fn load_vertices(path: &Path) -> Result<Vec<GeoPoint>, GeoFileError> {
    let text = fs::read_to_string(path).map_err(|source| GeoFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = parse_fields(line);
        let mk_err = |reason: String| GeoFileError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            reason,
        };
        if fields.len() != 2 {
            return Err(mk_err(format!("expected 'lat,lon', got {} fields", fields.len())));
        }
        let lat: f64 = fields[0]
            .parse()
            .map_err(|_| mk_err(format!("bad latitude '{}'", fields[0])))?;
        let lon: f64 = fields[1]
            .parse()
            .map_err(|_| mk_err(format!("bad longitude '{}'", fields[1])))?;
        out.push(GeoPoint { lat, lon });
    }
    Ok(out)
}

/// Reads an exits file: one `label,lat,lon` per line, `#` comments ignored.
pub fn load_exits(path: &Path) -> Result<Vec<(String, GeoPoint)>, GeoFileError> {
    let text = fs::read_to_string(path).map_err(|source| GeoFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = parse_fields(line);
        let mk_err = |reason: String| GeoFileError::Malformed {
            path: path.display().to_string(),
            line: lineno + 1,
            reason,
        };
        if fields.len() != 3 {
            return Err(mk_err(format!("expected 'label,lat,lon', got {} fields", fields.len())));
        }
        let lat: f64 = fields[1]
            .parse()
            .map_err(|_| mk_err(format!("bad latitude '{}'", fields[1])))?;
        let lon: f64 = fields[2]
            .parse()
            .map_err(|_| mk_err(format!("bad longitude '{}'", fields[2])))?;
        out.push((fields[0].to_string(), GeoPoint { lat, lon }));
    }
    Ok(out)
}

/// Generates a regular circular ring: `n_vertices` around a circle whose
/// polyline circumference approximates `circumference_m`, with `n_exits`
/// evenly spaced exits placed exactly on vertices. `n_vertices` must be a
/// multiple of `n_exits` so all segments come out equal.
pub fn synthetic_circle(
    center: GeoPoint,
    circumference_m: f64,
    n_vertices: usize,
    n_exits: usize,
) -> (Vec<GeoPoint>, Vec<(String, GeoPoint)>) {
    assert!(n_vertices >= 3 && n_exits >= 2, "degenerate synthetic ring");
    assert!(
        n_vertices.is_multiple_of(n_exits),
        "n_vertices must be a multiple of n_exits for equal segments"
    );
    let n = n_vertices as f64;
    // Radius such that the inscribed polygon's perimeter hits the target.
    let radius = circumference_m / (2.0 * n * (PI / n).sin());
    let plane = TangentPlane::new(center);
    let mut vertices = Vec::with_capacity(n_vertices);
    for k in 0..n_vertices {
        // Negative angle step so vertex order runs clockwise on the map.
        let theta = -2.0 * PI * k as f64 / n;
        let (x, y) = (radius * theta.sin(), radius * theta.cos());
        vertices.push(plane.to_geo(x, y));
    }
    let stride = n_vertices / n_exits;
    let exits = (0..n_exits)
        .map(|e| (format!("E{:02}", e + 1), vertices[e * stride]))
        .collect();
    (vertices, exits)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent great-circle implementation used as the length oracle.
    fn oracle_haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
        let to_rad = PI / 180.0;
        let (p1, l1) = (a.0 * to_rad, a.1 * to_rad);
        let (p2, l2) = (b.0 * to_rad, b.1 * to_rad);
        let sdlat = ((p2 - p1) / 2.0).sin();
        let sdlon = ((l2 - l1) / 2.0).sin();
        let h = sdlat * sdlat + p1.cos() * p2.cos() * sdlon * sdlon;
        2.0 * 6_371_000.0 * h.sqrt().asin()
    }

    /// Square loop with ~100 m sides near the equator for easy arithmetic.
    fn square_ring() -> RingGeometry {
        let d = 100.0 / EARTH_RADIUS_M * 180.0 / PI; // ~100 m in degrees
        let vertices = vec![
            GeoPoint { lat: 0.0, lon: 0.0 },
            GeoPoint { lat: 0.0, lon: d },
            GeoPoint { lat: -d, lon: d },
            GeoPoint { lat: -d, lon: 0.0 },
        ];
        let exits = vec![
            ("A".to_string(), vertices[0]),
            ("B".to_string(), vertices[2]),
        ];
        build_ring(&vertices, &exits, DEFAULT_MAX_OFFSET_M).unwrap()
    }

    #[test]
    fn square_loop_circumference_matches_oracle() {
        let g = square_ring();
        let vs: Vec<(f64, f64)> = g.vertices().iter().map(|v| (v.lat, v.lon)).collect();
        let mut expected = 0.0;
        for i in 0..4 {
            expected += oracle_haversine(vs[i], vs[(i + 1) % 4]);
        }
        assert!((g.circumference() - expected).abs() < 1e-9);
        assert!((g.circumference() - 400.0).abs() < 1.0, "C = {}", g.circumference());
        assert_eq!(g.segments().len(), 2);
        for s in g.segments() {
            assert!((s.length_m - g.circumference() / 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_vertices_rejected() {
        let vertices = vec![
            GeoPoint { lat: 0.0, lon: 0.0 },
            GeoPoint { lat: 0.0, lon: 0.001 },
        ];
        let exits = vec![
            ("A".to_string(), vertices[0]),
            ("B".to_string(), vertices[1]),
        ];
        let err = build_ring(&vertices, &exits, 100.0).unwrap_err();
        assert!(matches!(err, GeometryError::TooFewVertices(2)));
    }

    #[test]
    fn regular_polygon_circumference_close_to_circle() {
        let center = GeoPoint { lat: 41.9, lon: 12.5 };
        let (vertices, exits) = synthetic_circle(center, 29_000.0, 360, 4);
        let g = build_ring(&vertices, &exits, 100.0).unwrap();
        // Closed form: a 360-gon's perimeter is within 0.1% of 2*pi*r.
        let r = 29_000.0 / (2.0 * 360.0 * (PI / 360.0).sin());
        let circle = 2.0 * PI * r;
        assert!(
            (g.circumference() - circle).abs() / circle < 1e-3,
            "polyline C {} vs circle {}",
            g.circumference(),
            circle
        );
    }

    #[test]
    fn exit_far_from_ring_rejected() {
        let d = 100.0 / EARTH_RADIUS_M * 180.0 / PI;
        let vertices = vec![
            GeoPoint { lat: 0.0, lon: 0.0 },
            GeoPoint { lat: 0.0, lon: d },
            GeoPoint { lat: -d, lon: d },
            GeoPoint { lat: -d, lon: 0.0 },
        ];
        let exits = vec![
            ("A".to_string(), vertices[0]),
            ("far".to_string(), GeoPoint { lat: 1.0, lon: 1.0 }),
        ];
        let err = build_ring(&vertices, &exits, 100.0).unwrap_err();
        assert!(matches!(err, GeometryError::ExitOffRing { .. }));
    }

    #[test]
    fn duplicate_exit_arc_rejected() {
        let d = 100.0 / EARTH_RADIUS_M * 180.0 / PI;
        let vertices = vec![
            GeoPoint { lat: 0.0, lon: 0.0 },
            GeoPoint { lat: 0.0, lon: d },
            GeoPoint { lat: -d, lon: d },
            GeoPoint { lat: -d, lon: 0.0 },
        ];
        let exits = vec![
            ("A".to_string(), vertices[1]),
            ("B".to_string(), vertices[1]),
        ];
        let err = build_ring(&vertices, &exits, 100.0).unwrap_err();
        assert!(matches!(err, GeometryError::DuplicateExitArc { .. }));
    }

    #[test]
    fn projection_on_vertex_has_zero_offset() {
        let g = square_ring();
        for (i, v) in g.vertices().to_vec().iter().enumerate() {
            let (arc, offset) = g.arc_position(*v);
            assert!(offset < 1e-6, "vertex {} offset {}", i, offset);
            assert!(
                (arc.0 - g.cumulative_arc[i]).abs() < 1e-6,
                "vertex {}: arc {} vs cumulative {}",
                i,
                arc.0,
                g.cumulative_arc[i]
            );
        }
    }

    #[test]
    fn projection_from_edge_midpoint_offset() {
        let g = square_ring();
        // 10 m north of the midpoint of the first edge (which runs along
        // lat 0 from lon 0 eastwards).
        let d = 100.0 / EARTH_RADIUS_M * 180.0 / PI;
        let p = GeoPoint {
            lat: 10.0 / EARTH_RADIUS_M * 180.0 / PI,
            lon: d / 2.0,
        };
        let (arc, offset) = g.arc_position(p);
        let edge_len = g.cumulative_arc[1];
        assert!((arc.0 - edge_len / 2.0).abs() < 0.05, "arc {}", arc.0);
        assert!((offset - 10.0).abs() < 0.05, "offset {}", offset);
    }

    #[test]
    fn directed_distances_match_modular_oracle() {
        let g = ring_with_c400();
        let c = g.circumference();
        let scale = c / 400.0; // map the oracle's C=400 numbers onto this ring
        let from = ArcPosition(100.0 * scale);
        let to = ArcPosition(350.0 * scale);
        let cw = g.directed_arc_distance(from, to, Direction::Clockwise);
        let ccw = g.directed_arc_distance(from, to, Direction::Counterclockwise);
        assert!((cw - 250.0 * scale).abs() < 1e-9);
        assert!((ccw - 150.0 * scale).abs() < 1e-9);
        assert_eq!(g.directed_arc_distance(from, from, Direction::Clockwise), 0.0);
    }

    fn ring_with_c400() -> RingGeometry {
        // A 40-gon sized to land very close to C = 400 m.
        let center = GeoPoint { lat: 0.0, lon: 0.0 };
        let (v, e) = synthetic_circle(center, 400.0, 40, 2);
        build_ring(&v, &e, 100.0).unwrap()
    }

    #[test]
    fn segment_lookup_boundaries() {
        let center = GeoPoint { lat: 41.9, lon: 12.5 };
        let (v, e) = synthetic_circle(center, 29_000.0, 580, 29);
        let g = build_ring(&v, &e, 100.0).unwrap();
        assert_eq!(g.segments().len(), 29);
        let c = g.circumference();
        // Half-way point lands in segment 15 of 29 equal segments.
        let j = g.segment_of(ArcPosition(c * 14_500.0 / 29_000.0));
        assert_eq!(j, 15);
        // A segment's start arc belongs to that segment.
        for seg in g.segments() {
            assert_eq!(g.segment_of(ArcPosition(seg.start_arc)), seg.index);
        }
        // Just before the wrap point we are on the last segment.
        let eps = 1e-9;
        assert_eq!(g.segment_of(ArcPosition(c - eps)), 29);
        // Segment lengths sum to C.
        let total: f64 = g.segments().iter().map(|s| s.length_m).sum();
        assert!((total - c).abs() / c < 1e-6);
    }

    #[test]
    fn segment_of_is_total() {
        let g = square_ring();
        let c = g.circumference();
        let mut s = 0.0;
        while s < c {
            let j = g.segment_of(ArcPosition(s));
            assert!(j >= 1 && j <= g.segments().len() as u32);
            s += c / 1013.0;
        }
    }

    #[test]
    fn build_is_deterministic() {
        let center = GeoPoint { lat: 41.9, lon: 12.5 };
        let (v, e) = synthetic_circle(center, 29_000.0, 580, 29);
        let a = build_ring(&v, &e, 100.0).unwrap();
        let b = build_ring(&v, &e, 100.0).unwrap();
        assert_eq!(a.circumference().to_bits(), b.circumference().to_bits());
        for (x, y) in a.cumulative_arc.iter().zip(&b.cumulative_arc) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.exits().iter().zip(b.exits()) {
            assert_eq!(x.arc.0.to_bits(), y.arc.0.to_bits());
        }
    }

    #[test]
    fn point_at_arc_round_trips() {
        let center = GeoPoint { lat: 41.9, lon: 12.5 };
        let (v, e) = synthetic_circle(center, 29_000.0, 580, 29);
        let g = build_ring(&v, &e, 100.0).unwrap();
        for k in 0..50 {
            let s = g.circumference() * k as f64 / 50.0;
            let p = g.point_at_arc(ArcPosition(s));
            let (arc, offset) = g.arc_position(p);
            assert!(offset < 0.01, "offset {}", offset);
            assert!(
                (arc.0 - s).abs() < 0.01 || (g.circumference() - (arc.0 - s).abs()) < 0.01,
                "arc {} vs {}",
                arc.0,
                s
            );
        }
    }

    #[test]
    fn next_exit_and_exit_ahead() {
        let center = GeoPoint { lat: 41.9, lon: 12.5 };
        let (v, e) = synthetic_circle(center, 10_000.0, 100, 10);
        let g = build_ring(&v, &e, 100.0).unwrap();
        let seg1 = g.segment_by_index(1).unwrap();
        let mid = ArcPosition(seg1.start_arc + seg1.length_m / 2.0);
        assert_eq!(g.next_exit(mid, Direction::Clockwise).id, 2);
        assert_eq!(g.next_exit(mid, Direction::Counterclockwise).id, 1);
        // Standing exactly on exit 1: the next CW exit is 2, CCW is 10.
        let at1 = g.exit_by_id(1).unwrap().arc;
        assert_eq!(g.next_exit(at1, Direction::Clockwise).id, 2);
        assert_eq!(g.next_exit(at1, Direction::Counterclockwise).id, 10);
        assert_eq!(g.exit_ahead(mid, Direction::Clockwise, 3).id, 4);
        assert_eq!(g.exit_ahead(mid, Direction::Counterclockwise, 3).id, 9);
    }

    #[test]
    fn file_loaders_skip_comments_and_report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let gpath = dir.path().join("geometry.csv");
        std::fs::write(&gpath, "# ring\n41.0,12.0\n41.1,12.1\n\n41.2,12.0\n").unwrap();
        let vs = load_vertices(&gpath).unwrap();
        assert_eq!(vs.len(), 3);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "41.0,12.0\nnot-a-number,12.1\n").unwrap();
        let err = load_vertices(&bad).unwrap_err();
        match err {
            GeoFileError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let epath = dir.path().join("exits.csv");
        std::fs::write(&epath, "# exits\nE01,41.0,12.0\nE02,41.1,12.1\n").unwrap();
        let es = load_exits(&epath).unwrap();
        assert_eq!(es.len(), 2);
        assert_eq!(es[0].0, "E01");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn test_ring() -> RingGeometry {
            let center = GeoPoint { lat: 41.9, lon: 12.5 };
            let (v, e) = synthetic_circle(center, 10_000.0, 100, 10);
            build_ring(&v, &e, 100.0).unwrap()
        }

        proptest! {
            #[test]
            fn distances_partition_the_ring(a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let g = test_ring();
                let c = g.circumference();
                let pa = ArcPosition(a * c);
                let pb = ArcPosition(b * c);
                let dir = Direction::Clockwise;
                let d1 = g.directed_arc_distance(pa, pb, dir);
                let d2 = g.directed_arc_distance(pb, pa, dir);
                if pa.0 != pb.0 {
                    prop_assert!(((d1 + d2) - c).abs() / c < 1e-9);
                }
                prop_assert!((0.0..c).contains(&d1));
                prop_assert!((0.0..c).contains(&d2));
            }

            #[test]
            fn cw_equals_reversed_ccw(a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let g = test_ring();
                let c = g.circumference();
                let pa = ArcPosition(a * c);
                let pb = ArcPosition(b * c);
                let cw = g.directed_arc_distance(pa, pb, Direction::Clockwise);
                let ccw = g.directed_arc_distance(pb, pa, Direction::Counterclockwise);
                prop_assert_eq!(cw.to_bits(), ccw.to_bits());
            }

            #[test]
            fn every_arc_has_exactly_one_segment(a in 0.0f64..1.0) {
                let g = test_ring();
                let s = ArcPosition(a * g.circumference());
                let j = g.segment_of(s);
                prop_assert!(j >= 1 && j <= g.segments().len() as u32);
                let seg = g.segment_by_index(j).unwrap();
                let along = (s.0 - seg.start_arc).rem_euclid(g.circumference());
                prop_assert!(along < seg.length_m + 1e-9);
            }
        }
    }
}
