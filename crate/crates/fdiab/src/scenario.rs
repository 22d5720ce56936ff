//! Configuration, topology generation, and random-seed discipline.
//!
//! One master seed drives the whole campaign. Each trial derives an
//! independent child stream ([`trial_rng`]) keyed by (K̃, trial index), so
//! trials can run in any order — serially or in parallel — and reproduce
//! bit-identically.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::{Error, Result};

/// Planar antenna-array dimensions, serialized as `[horizontal, vertical]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct ArrayDims {
    /// Number of columns (horizontal elements).
    pub horizontal: usize,
    /// Number of rows (vertical elements).
    pub vertical: usize,
}

impl ArrayDims {
    /// Total element count.
    pub fn total(&self) -> usize {
        self.horizontal * self.vertical
    }
}

impl From<[usize; 2]> for ArrayDims {
    fn from(a: [usize; 2]) -> Self {
        ArrayDims { horizontal: a[0], vertical: a[1] }
    }
}

impl From<ArrayDims> for [usize; 2] {
    fn from(d: ArrayDims) -> Self {
        [d.horizontal, d.vertical]
    }
}

/// Full simulation configuration. Every field has a default; a config file
/// (flat JSON object, keys equal to field names) overrides defaults, then
/// `FDIAB_<UPPERCASE_KEY>` environment variables, then CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
    /// Thermal-noise power spectral density in dBm/Hz.
    pub noise_density: f64,
    /// System bandwidth in Hz (turns the density into a noise power).
    pub bandwidth: f64,
    /// gNB antenna panel (columns × rows).
    pub n_gnb: ArrayDims,
    /// IAB-node antenna panel.
    pub n_iab: ArrayDims,
    /// UE antenna panel.
    pub n_ue: ArrayDims,
    /// gNB total transmit-power budget in dBm.
    pub p_max_gnb: f64,
    /// IAB-node total transmit-power budget in dBm.
    pub p_max_iab: f64,
    /// Per-UE transmit-power cap in dBm.
    pub p_max_ue: f64,
    /// Number of UEs served by the gNB.
    pub k_gnb: usize,
    /// Number of UEs served by the IAB node (the sweep variable).
    pub k_iab: usize,
    /// gNB coverage radius in meters.
    pub radius_gnb: f64,
    /// IAB-node coverage radius in meters.
    pub radius_iab: f64,
    /// Scattering clusters per access/cross link.
    pub n_clusters: usize,
    /// Paths per cluster.
    pub n_paths: usize,
    /// Even positive exponent for the max-sum spectral-efficiency
    /// approximation (larger = tighter, more ill-conditioned).
    pub epsilon_se: u32,
    /// Relative duality-gap threshold handed to the GP solver.
    pub solver_tolerance: f64,
    /// Master RNG seed.
    pub seed: u64,
    /// Receiver noise figure in dB, added to the noise power at every node.
    pub noise_figure_db: f64,
    /// Antenna height of the gNB in meters.
    pub height_gnb: f64,
    /// Antenna height of the IAB node in meters.
    pub height_iab: f64,
    /// UE antenna height in meters.
    pub height_ue: f64,
    /// gNB→IAB ground distance in meters; `null` places the IAB node on the
    /// gNB coverage boundary (`radius_gnb`).
    pub iab_distance: Option<f64>,
    /// Minimum UE distance from its serving node in meters.
    pub min_ue_distance: f64,
    /// Laplacian azimuth angle-spread (degrees) for non-line-of-sight paths.
    pub azimuth_spread_deg: f64,
    /// Laplacian elevation angle-spread (degrees).
    pub elevation_spread_deg: f64,
    /// Enable log-normal shadow fading.
    pub shadowing: bool,
    /// Shadow-fading standard deviation on line-of-sight links, dB.
    pub shadow_sigma_los_db: f64,
    /// Shadow-fading standard deviation on non-line-of-sight links, dB.
    pub shadow_sigma_nlos_db: f64,
    /// Peak gain of the base-station sector element pattern in dBi.
    pub sector_max_gain_dbi: f64,
    /// 3 dB beamwidth of the sector element pattern in degrees.
    pub sector_beamwidth_deg: f64,
    /// Front-to-back attenuation cap of the sector pattern in dB.
    pub sector_front_back_db: f64,
    /// Antenna element spacing in wavelengths.
    pub element_spacing: f64,
    /// Lower bound (watts) on every optimized stream power; keeps the GP
    /// domain strictly positive.
    pub power_floor: f64,
    /// Cap reported IAB-area sum SE at the backhaul SE per direction when
    /// recording trial results (physical bottleneck; the uniform benchmark
    /// can otherwise overstate delivered rate).
    pub enforce_backhaul_cap: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            carrier_frequency: 30e9,
            noise_density: -173.0,
            bandwidth: 100e6,
            n_gnb: ArrayDims { horizontal: 16, vertical: 4 },
            n_iab: ArrayDims { horizontal: 8, vertical: 4 },
            n_ue: ArrayDims { horizontal: 4, vertical: 2 },
            p_max_gnb: 43.0,
            p_max_iab: 43.0,
            p_max_ue: 23.0,
            k_gnb: 12,
            k_iab: 1,
            radius_gnb: 100.0,
            radius_iab: 50.0,
            n_clusters: 4,
            n_paths: 3,
            epsilon_se: 100,
            solver_tolerance: 1e-6,
            seed: 1,
            noise_figure_db: 0.0,
            height_gnb: 25.0,
            height_iab: 10.0,
            height_ue: 1.5,
            iab_distance: None,
            min_ue_distance: 10.0,
            azimuth_spread_deg: 15.0,
            elevation_spread_deg: 5.0,
            shadowing: true,
            shadow_sigma_los_db: 4.0,
            shadow_sigma_nlos_db: 7.82,
            sector_max_gain_dbi: 8.0,
            sector_beamwidth_deg: 120.0,
            sector_front_back_db: 30.0,
            element_spacing: 0.5,
            power_floor: 1e-12,
            enforce_backhaul_cap: true,
        }
    }
}

impl SystemConfig {
    /// gNB→IAB ground distance (defaults to the coverage boundary).
    pub fn iab_distance_m(&self) -> f64 {
        self.iab_distance.unwrap_or(self.radius_gnb)
    }

    /// Receiver noise power in watts: density + 10·log10(bandwidth) +
    /// noise figure, converted from dBm. Identical at every node type.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_density + 10.0 * self.bandwidth.log10() + self.noise_figure_db)
    }

    /// gNB power budget in watts.
    pub fn p_max_gnb_w(&self) -> f64 {
        dbm_to_watts(self.p_max_gnb)
    }

    /// IAB-node power budget in watts.
    pub fn p_max_iab_w(&self) -> f64 {
        dbm_to_watts(self.p_max_iab)
    }

    /// Per-UE power cap in watts.
    pub fn p_max_ue_w(&self) -> f64 {
        dbm_to_watts(self.p_max_ue)
    }
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Convert a dB value to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB.
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Outcome of [`validate_config`]: the list of violated invariants
/// (empty ⇒ valid).
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    /// Human-readable description of each violated invariant.
    pub violations: Vec<String>,
}

impl ValidationReport {
    /// True when no invariant is violated.
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check every configuration invariant; returns all violations rather than
/// stopping at the first.
pub fn validate_config(cfg: &SystemConfig) -> ValidationReport {
    let mut v = Vec::new();
    let need_gnb = cfg.k_gnb + 1;
    if cfg.n_gnb.total() < need_gnb {
        v.push(format!(
            "gNB antenna count {} is below the k_gnb + 1 = {} streams it must beamform",
            cfg.n_gnb.total(),
            need_gnb
        ));
    }
    let need_iab = cfg.k_iab + 1;
    if cfg.n_iab.total() < need_iab {
        v.push(format!(
            "IAB antenna count {} is below the k_iab + 1 = {} streams it must beamform",
            cfg.n_iab.total(),
            need_iab
        ));
    }
    for (name, val) in [
        ("carrier_frequency", cfg.carrier_frequency),
        ("bandwidth", cfg.bandwidth),
        ("radius_gnb", cfg.radius_gnb),
        ("radius_iab", cfg.radius_iab),
        ("min_ue_distance", cfg.min_ue_distance),
        ("solver_tolerance", cfg.solver_tolerance),
        ("power_floor", cfg.power_floor),
        ("element_spacing", cfg.element_spacing),
        ("sector_beamwidth_deg", cfg.sector_beamwidth_deg),
    ] {
        if !(val > 0.0) {
            v.push(format!("{name} must be strictly positive, got {val}"));
        }
    }
    for (name, val) in [
        ("p_max_gnb", cfg.p_max_gnb_w()),
        ("p_max_iab", cfg.p_max_iab_w()),
        ("p_max_ue", cfg.p_max_ue_w()),
    ] {
        if !(val > 0.0) || !val.is_finite() {
            v.push(format!("{name} must map to a strictly positive finite power, got {val} W"));
        }
    }
    if cfg.epsilon_se < 2 || cfg.epsilon_se % 2 != 0 {
        v.push(format!(
            "epsilon_se must be even and at least 2, got {}",
            cfg.epsilon_se
        ));
    }
    if cfg.n_clusters == 0 {
        v.push("n_clusters must be at least 1".into());
    }
    if cfg.n_paths == 0 {
        v.push("n_paths must be at least 1".into());
    }
    if cfg.min_ue_distance >= cfg.radius_gnb {
        v.push(format!(
            "min_ue_distance {} must be below radius_gnb {}",
            cfg.min_ue_distance, cfg.radius_gnb
        ));
    }
    if cfg.min_ue_distance >= cfg.radius_iab {
        v.push(format!(
            "min_ue_distance {} must be below radius_iab {}",
            cfg.min_ue_distance, cfg.radius_iab
        ));
    }
    if cfg.height_gnb <= cfg.height_ue {
        v.push(format!(
            "height_gnb {} must exceed height_ue {}",
            cfg.height_gnb, cfg.height_ue
        ));
    }
    if cfg.height_iab <= cfg.height_ue {
        v.push(format!(
            "height_iab {} must exceed height_ue {}",
            cfg.height_iab, cfg.height_ue
        ));
    }
    if let Some(d) = cfg.iab_distance {
        if !(d > 0.0) {
            v.push(format!("iab_distance must be strictly positive, got {d}"));
        }
    }
    if cfg.azimuth_spread_deg < 0.0 || cfg.elevation_spread_deg < 0.0 {
        v.push("angle spreads must be nonnegative".into());
    }
    let min_budget = cfg.p_max_gnb_w().min(cfg.p_max_iab_w()).min(cfg.p_max_ue_w());
    if cfg.power_floor >= min_budget {
        v.push(format!(
            "power_floor {} W must lie below the smallest power budget {} W",
            cfg.power_floor, min_budget
        ));
    }
    ValidationReport { violations: v }
}

/// Which node serves a UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Serving {
    /// Served by the donor gNB.
    Gnb,
    /// Served by the IAB node.
    Iab,
}

/// One realization of node placement. UE list order: the `k_gnb` gNB-area
/// UEs first, then the `k_iab` IAB-area UEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// gNB position, meters.
    pub gnb_position: [f64; 3],
    /// IAB-node position, meters.
    pub iab_position: [f64; 3],
    /// UE positions, meters.
    pub ue_positions: Vec<[f64; 3]>,
    /// Serving-node tag per UE (parallel to `ue_positions`).
    pub serving: Vec<Serving>,
}

impl Topology {
    /// Number of gNB-served UEs.
    pub fn k_gnb(&self) -> usize {
        self.serving.iter().filter(|s| **s == Serving::Gnb).count()
    }

    /// Number of IAB-served UEs.
    pub fn k_iab(&self) -> usize {
        self.serving.iter().filter(|s| **s == Serving::Iab).count()
    }
}

/// Euclidean distance between two 3-D points.
pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Derive the RNG for one trial from the master seed. Stream id packs the
/// swept K̃ value and the trial index so every (K̃, trial) cell is an
/// independent, order-free random stream.
pub fn trial_rng(seed: u64, ktilde: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((ktilde as u64) << 32) | (trial & 0xffff_ffff));
    rng
}

/// Place the gNB at the origin, the IAB node on the +x axis, and drop UEs
/// uniformly over each node's 120° annular coverage sector (both sector
/// boresights face +x; the IAB node extends coverage outward). Draw order
/// is fixed — gNB UEs first, azimuth before range — so a given RNG state
/// maps to exactly one topology.
pub fn generate_topology<R: Rng>(cfg: &SystemConfig, rng: &mut R) -> Topology {
    let gnb = [0.0, 0.0, cfg.height_gnb];
    let iab = [cfg.iab_distance_m(), 0.0, cfg.height_iab];
    let mut positions = Vec::with_capacity(cfg.k_gnb + cfg.k_iab);
    let mut serving = Vec::with_capacity(cfg.k_gnb + cfg.k_iab);
    let sector_half = 60f64.to_radians();
    let place = |rng: &mut R, center: &[f64; 3], radius: f64| {
        let az = rng.gen_range(-sector_half..sector_half);
        let rmin2 = cfg.min_ue_distance * cfg.min_ue_distance;
        let u: f64 = rng.gen();
        let r = (rmin2 + u * (radius * radius - rmin2)).sqrt();
        [center[0] + r * az.cos(), center[1] + r * az.sin(), cfg.height_ue]
    };
    for _ in 0..cfg.k_gnb {
        positions.push(place(rng, &gnb, cfg.radius_gnb));
        serving.push(Serving::Gnb);
    }
    for _ in 0..cfg.k_iab {
        positions.push(place(rng, &iab, cfg.radius_iab));
        serving.push(Serving::Iab);
    }
    Topology { gnb_position: gnb, iab_position: iab, ue_positions: positions, serving }
}

/// Environment-variable prefix for config overrides
/// (`FDIAB_SEED=7`, `FDIAB_N_GNB=[8,2]`, …).
pub const ENV_PREFIX: &str = "FDIAB_";

/// Overlay `KEY=value` pairs (already stripped of the prefix) onto a JSON
/// config object. Values parse as JSON when possible (numbers, booleans,
/// arrays, `null`) and fall back to plain strings.
pub fn apply_env_overrides<I>(doc: &mut serde_json::Value, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("config document must be a JSON object".into()))?;
    for (key, raw) in vars {
        let field = key.to_ascii_lowercase();
        let value = serde_json::from_str::<serde_json::Value>(&raw)
            .unwrap_or(serde_json::Value::String(raw));
        obj.insert(field, value);
    }
    Ok(())
}

/// Load a config: defaults, overridden by the optional JSON file, then by
/// `FDIAB_*` environment variables. Unknown keys from either source are
/// errors.
pub fn load_config(path: Option<&Path>) -> Result<SystemConfig> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => serde_json::Value::Object(Default::default()),
    };
    let env_pairs: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|s| (s.to_string(), v)))
        .collect();
    apply_env_overrides(&mut doc, env_pairs)?;
    serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let report = validate_config(&SystemConfig::default());
        assert!(report.is_valid(), "violations: {:?}", report.violations);
    }

    #[test]
    fn oversubscribed_gnb_array_flagged() {
        let cfg = SystemConfig { k_gnb: 64, ..Default::default() };
        let report = validate_config(&cfg);
        assert!(!report.is_valid());
        assert!(
            report.violations.iter().any(|v| v.contains("gNB antenna count")),
            "violations: {:?}",
            report.violations
        );
    }

    #[test]
    fn odd_epsilon_flagged() {
        let cfg = SystemConfig { epsilon_se: 3, ..Default::default() };
        let report = validate_config(&cfg);
        assert!(report.violations.iter().any(|v| v.contains("even")));
    }

    #[test]
    fn noise_power_matches_closed_form() {
        let cfg = SystemConfig::default();
        // −173 dBm/Hz over 100 MHz = −93 dBm.
        let expect = dbm_to_watts(-93.0);
        assert!((cfg.noise_power_w() - expect).abs() / expect < 1e-12);
        assert!((expect - 5.011872336272714e-13).abs() / expect < 1e-12);
    }

    #[test]
    fn power_conversions() {
        assert!((dbm_to_watts(43.0) - 19.952623149688797).abs() < 1e-12);
        assert!((dbm_to_watts(23.0) - 0.19952623149688797).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(17.3)) - 17.3).abs() < 1e-12);
        assert!((db_to_linear(3.0) - 1.9952623149688795).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(-7.25)) + 7.25).abs() < 1e-12);
    }

    #[test]
    fn topology_counts_and_partition() {
        let cfg = SystemConfig::default();
        let mut rng = trial_rng(cfg.seed, cfg.k_iab, 0);
        let topo = generate_topology(&cfg, &mut rng);
        assert_eq!(topo.ue_positions.len(), 13);
        assert_eq!(topo.k_gnb(), 12);
        assert_eq!(topo.k_iab(), 1);
        assert_eq!(topo.k_gnb() + topo.k_iab(), topo.ue_positions.len());
        // gNB UEs listed first.
        assert!(topo.serving[..12].iter().all(|s| *s == Serving::Gnb));
        assert_eq!(topo.serving[12], Serving::Iab);
    }

    #[test]
    fn empty_iab_set_supported() {
        let cfg = SystemConfig { k_iab: 0, ..Default::default() };
        let topo = generate_topology(&cfg, &mut trial_rng(1, 0, 0));
        assert_eq!(topo.k_iab(), 0);
        assert_eq!(topo.ue_positions.len(), cfg.k_gnb);
    }

    #[test]
    fn topology_deterministic() {
        let cfg = SystemConfig::default();
        let a = generate_topology(&cfg, &mut trial_rng(42, 2, 7));
        let b = generate_topology(&cfg, &mut trial_rng(42, 2, 7));
        assert_eq!(a, b);
        let c = generate_topology(&cfg, &mut trial_rng(42, 2, 8));
        assert_ne!(a, c);
    }

    #[test]
    fn geometry_within_radii_and_heights() {
        let cfg = SystemConfig::default();
        for trial in 0..25u64 {
            let topo = generate_topology(&cfg, &mut trial_rng(3, 1, trial));
            assert!(topo.gnb_position[2] > cfg.height_ue);
            assert!(topo.iab_position[2] > cfg.height_ue);
            for (pos, srv) in topo.ue_positions.iter().zip(&topo.serving) {
                let (center, radius) = match srv {
                    Serving::Gnb => (&topo.gnb_position, cfg.radius_gnb),
                    Serving::Iab => (&topo.iab_position, cfg.radius_iab),
                };
                let ground = ((pos[0] - center[0]).powi(2) + (pos[1] - center[1]).powi(2)).sqrt();
                assert!(ground <= radius + 1e-9, "UE at {ground} m exceeds {radius}");
                assert!(ground >= cfg.min_ue_distance - 1e-9);
                assert_eq!(pos[2], cfg.height_ue);
            }
        }
    }

    #[test]
    fn array_dims_serde_roundtrip() {
        let d: ArrayDims = serde_json::from_str("[16,4]").unwrap();
        assert_eq!(d, ArrayDims { horizontal: 16, vertical: 4 });
        assert_eq!(d.total(), 64);
        assert_eq!(serde_json::to_string(&d).unwrap(), "[16,4]");
    }

    #[test]
    fn config_file_and_env_precedence() {
        let mut doc = serde_json::json!({"seed": 5, "k_iab": 3});
        apply_env_overrides(
            &mut doc,
            [("SEED".to_string(), "9".to_string()), ("N_UE".to_string(), "[2,1]".to_string())],
        )
        .unwrap();
        let cfg: SystemConfig = serde_json::from_value(doc).unwrap();
        assert_eq!(cfg.seed, 9); // env beats file
        assert_eq!(cfg.k_iab, 3); // file beats default
        assert_eq!(cfg.n_ue, ArrayDims { horizontal: 2, vertical: 1 });
        assert_eq!(cfg.k_gnb, 12); // untouched default
    }

    #[test]
    fn unknown_config_key_rejected() {
        let doc = serde_json::json!({"seeed": 5});
        let err = serde_json::from_value::<SystemConfig>(doc).unwrap_err();
        assert!(err.to_string().contains("seeed"));
    }

    #[test]
    fn iab_distance_defaults_to_coverage_boundary() {
        let cfg = SystemConfig::default();
        assert_eq!(cfg.iab_distance_m(), cfg.radius_gnb);
        let cfg = SystemConfig { iab_distance: Some(75.0), ..Default::default() };
        assert_eq!(cfg.iab_distance_m(), 75.0);
    }
}
