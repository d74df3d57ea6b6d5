use super::schema::StationMeta;

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance between two points given in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

/// Static station relation: node ids and pairwise distances. Kept for exploration; the
/// model does not consume it.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMeta {
    pub nodes: Vec<String>,
    /// row-major `[N, N]`, kilometres
    pub distance_km: Vec<f64>,
}

impl GraphMeta {
    pub fn from_stations(stations: &[StationMeta]) -> GraphMeta {
        let n = stations.len();
        let mut distance_km = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = haversine_km(stations[i].lat, stations[i].lon, stations[j].lat, stations[j].lon);
                distance_km[i * n + j] = d;
                distance_km[j * n + i] = d;
            }
        }
        GraphMeta { nodes: stations.iter().map(|s| s.id.clone()).collect(), distance_km }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance_km[i * self.nodes.len() + j]
    }
}
