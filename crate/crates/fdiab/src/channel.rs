//! Cluster-based mmWave channel generation for every link of one network
//! realization: gNB↔UE access links, the rank-1 LoS gNB↔IAB backhaul, the
//! IAB↔UE access links, and every UE↔UE cross link.
//!
//! Each matrix is a sum of path outer products
//! `H = √(Nt·Nr/(Nc·Nℓ)) · Σ α_p · a_r(θ_p)·a_t(φ_p)ᵀ` with `α_p ~ CN(0, Ω_p)`.
//! Per-path powers Ω carry the whole large-scale budget: 3GPP UMi
//! street-canyon pathloss, optional log-normal shadowing, and the
//! sector/element gains at the base-station ends. One matrix serves both
//! link directions (TDD reciprocity); uplink expressions use `H`, downlink
//! expressions its conjugate transpose.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::C64;
use crate::scenario::{db_to_linear, ArrayDims, SystemConfig, Topology};
use crate::{Error, Result};

/// Speed of light, m/s (3GPP propagation constant).
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planar antenna panel with a mounting azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    /// Vertical element count.
    pub rows: usize,
    /// Horizontal element count.
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    /// Boresight azimuth, radians.
    pub orientation: f64,
}

impl ArrayGeometry {
    /// Build from config panel dimensions and a boresight azimuth.
    pub fn new(dims: ArrayDims, element_spacing: f64, orientation: f64) -> Self {
        ArrayGeometry {
            rows: dims.vertical,
            cols: dims.horizontal,
            element_spacing,
            orientation,
        }
    }

    /// Total element count.
    pub fn total(&self) -> usize {
        self.rows * self.cols
    }
}

/// Steering vector of the panel toward an absolute (azimuth, elevation)
/// direction: unit-modulus entries, element (row 0, col 0) at phase zero,
/// flat index `row·cols + col`. The horizontal phase progression uses the
/// azimuth relative to the panel boresight.
pub fn array_response(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> Array1<C64> {
    let az = azimuth - geom.orientation;
    let k = 2.0 * std::f64::consts::PI * geom.element_spacing;
    let horiz = az.sin() * elevation.cos();
    let vert = elevation.sin();
    Array1::from_shape_fn(geom.total(), |idx| {
        let m = (idx / geom.cols) as f64;
        let n = (idx % geom.cols) as f64;
        C64::from_polar(1.0, k * (n * horiz + m * vert))
    })
}

/// Which physical link a channel matrix models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// gNB ↔ IAB node wireless backhaul (always LoS, single path).
    Backhaul,
    /// gNB ↔ gNB-served UE.
    GnbAccess,
    /// IAB node ↔ IAB-served UE.
    IabAccess,
    /// gNB-served UE ↔ IAB-served UE cross link (always NLoS).
    UeUeCross,
}

/// Network node identifier. UE indices are global, 0-based, gNB-area UEs
/// first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeId {
    /// The donor base station.
    Gnb,
    /// The relay node.
    Iab,
    /// A user terminal.
    Ue(usize),
}

/// One propagation path: complex gain plus departure/arrival directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    /// Complex path amplitude α (drawn CN(0, Ω)).
    pub amplitude: C64,
    /// Mean path power Ω (linear). Σ over a link's paths = large-scale gain.
    pub power: f64,
    /// Departure direction [azimuth, elevation], radians (absolute frame).
    pub aod: [f64; 2],
    /// Arrival direction [azimuth, elevation], radians (absolute frame).
    pub aoa: [f64; 2],
}

/// One generated channel matrix with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMatrix {
    /// Receiver-antennas × transmitter-antennas complex entries. The
    /// "receiver" side is the uplink receiver: the base station on access
    /// and backhaul links (gNB for `Backhaul`), the gNB-area UE on cross
    /// links.
    pub entries: Array2<C64>,
    /// Physical link class.
    pub link_kind: LinkKind,
    /// (receiver, transmitter) node ids.
    pub endpoints: (NodeId, NodeId),
}

/// Everything the SINR expressions need for one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// H_k per gNB-served UE k (gNB antennas × UE antennas).
    pub h_gnb_ue: Vec<ChannelMatrix>,
    /// H_0, the gNB ↔ IAB backhaul (gNB antennas × IAB antennas).
    pub h_backhaul: ChannelMatrix,
    /// H_i per IAB-served UE i (IAB antennas × UE antennas).
    pub h_iab_ue: Vec<ChannelMatrix>,
    /// Cross links `h_cross[i][k]` between IAB-UE i (transmitter side) and
    /// gNB-UE k (receiver side), each UE-antennas × UE-antennas.
    pub h_cross: Vec<Vec<ChannelMatrix>>,
}

impl ChannelSet {
    /// Total matrix count (access + backhaul + cross).
    pub fn matrix_count(&self) -> usize {
        self.h_gnb_ue.len()
            + 1
            + self.h_iab_ue.len()
            + self.h_cross.iter().map(Vec::len).sum::<usize>()
    }
}

fn heights_for(kind: LinkKind, cfg: &SystemConfig) -> (f64, f64) {
    match kind {
        LinkKind::Backhaul => (cfg.height_gnb, cfg.height_iab),
        LinkKind::GnbAccess => (cfg.height_gnb, cfg.height_ue),
        LinkKind::IabAccess => (cfg.height_iab, cfg.height_ue),
        LinkKind::UeUeCross => (cfg.height_ue, cfg.height_ue),
    }
}

/// 3GPP TR 38.901 UMi street-canyon LoS probability versus ground distance.
pub fn los_probability(d2d_m: f64) -> f64 {
    if d2d_m <= 18.0 {
        1.0
    } else {
        18.0 / d2d_m + (-d2d_m / 36.0).exp() * (1.0 - 18.0 / d2d_m)
    }
}

/// 3GPP TR 38.901 UMi street-canyon pathloss in dB at the configured
/// carrier frequency. `distance_m` is the 3-D separation; the ground
/// distance for the breakpoint test derives from the link-kind heights.
/// Backhaul links are always evaluated LoS and UE↔UE cross links always
/// NLoS, regardless of `los`.
pub fn pathloss_db(kind: LinkKind, distance_m: f64, los: bool, cfg: &SystemConfig) -> Result<f64> {
    if !(distance_m >= 1.0) {
        return Err(Error::Channel(format!(
            "pathloss model needs distance ≥ 1 m, got {distance_m}"
        )));
    }
    let los = match kind {
        LinkKind::Backhaul => true,
        LinkKind::UeUeCross => false,
        _ => los,
    };
    let fc_ghz = cfg.carrier_frequency / 1e9;
    let (h_bs, h_ut) = heights_for(kind, cfg);
    let dh = h_bs - h_ut;
    let d2d = (distance_m * distance_m - dh * dh).max(0.0).sqrt();
    // Breakpoint distance with 1 m effective environment height.
    let hb = (h_bs - 1.0).max(0.0);
    let hu = (h_ut - 1.0).max(0.0);
    let d_bp = 4.0 * hb * hu * cfg.carrier_frequency / SPEED_OF_LIGHT;
    let pl_los = if d2d <= d_bp || d_bp <= 0.0 {
        32.4 + 21.0 * distance_m.log10() + 20.0 * fc_ghz.log10()
    } else {
        32.4 + 40.0 * distance_m.log10() + 20.0 * fc_ghz.log10()
            - 9.5 * (d_bp * d_bp + dh * dh).log10()
    };
    if los {
        Ok(pl_los)
    } else {
        let pl_nlos =
            35.3 * distance_m.log10() + 22.4 + 21.3 * fc_ghz.log10() - 0.3 * (h_ut - 1.5);
        Ok(pl_nlos.max(pl_los))
    }
}

/// Sector element gain (dB) of the base-station pattern at an azimuth
/// offset from boresight: parabolic roll-off with the configured 3-dB
/// beamwidth, floored at the front-to-back attenuation.
pub fn sector_gain_db(azimuth_offset: f64, cfg: &SystemConfig) -> f64 {
    let bw = cfg.sector_beamwidth_deg.to_radians();
    let att = 12.0 * (azimuth_offset / bw).powi(2);
    cfg.sector_max_gain_dbi - att.min(cfg.sector_front_back_db)
}

/// Deterministic assembler: `H = scale · Σ_p amplitude_p · a_r(aoa)·a_t(aod)ᵀ`.
pub fn channel_from_paths(
    paths: &[PathComponent],
    rx_geom: &ArrayGeometry,
    tx_geom: &ArrayGeometry,
    scale: f64,
) -> Array2<C64> {
    let mut h = Array2::<C64>::zeros((rx_geom.total(), tx_geom.total()));
    for p in paths {
        let ar = array_response(rx_geom, p.aoa[0], p.aoa[1]);
        let at = array_response(tx_geom, p.aod[0], p.aod[1]);
        let amp = p.amplitude * scale;
        for (r, arv) in ar.iter().enumerate() {
            for (t, atv) in at.iter().enumerate() {
                h[(r, t)] += amp * arv * atv;
            }
        }
    }
    h
}

/// Resolved endpoints of a single link, ready for [`draw_channel`]. The
/// receiver side is the uplink receiver (see [`ChannelMatrix::entries`]).
#[derive(Debug, Clone)]
pub struct LinkSpec {
    /// Physical link class.
    pub kind: LinkKind,
    /// Receiver-side node.
    pub rx: NodeId,
    /// Transmitter-side node.
    pub tx: NodeId,
    /// Receiver panel.
    pub rx_geom: ArrayGeometry,
    /// Transmitter panel.
    pub tx_geom: ArrayGeometry,
    /// Receiver position, meters.
    pub rx_pos: [f64; 3],
    /// Transmitter position, meters.
    pub tx_pos: [f64; 3],
}

fn laplacian(rng: &mut impl Rng, sigma: f64) -> f64 {
    // Scale b = σ/√2 gives standard deviation σ.
    let b = sigma / std::f64::consts::SQRT_2;
    let u: f64 = rng.gen_range(-0.5..0.5);
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Draw one channel matrix. Randomness, in fixed order: LoS state
/// (access links only), shadowing (if enabled), per-path angle offsets
/// (all paths beyond the geometric first), then per-path complex gains.
/// The first path always points along the geometric ray; backhaul links
/// collapse to that single path (rank-1 by construction).
pub fn draw_channel(link: &LinkSpec, cfg: &SystemConfig, rng: &mut impl Rng) -> Result<ChannelMatrix> {
    let dx = link.rx_pos[0] - link.tx_pos[0];
    let dy = link.rx_pos[1] - link.tx_pos[1];
    let dz = link.rx_pos[2] - link.tx_pos[2];
    let ground = (dx * dx + dy * dy).sqrt();
    // Physical floor: the pathloss model is undefined below 1 m; two UEs
    // can land arbitrarily close, so clamp rather than fail the trial.
    let d3 = (ground * ground + dz * dz).sqrt().max(1.0);
    let az_tx_to_rx = dy.atan2(dx);
    let az_rx_to_tx = (-dy).atan2(-dx);
    let el_at_tx = dz.atan2(ground);
    let el_at_rx = (-dz).atan2(ground);

    let los = match link.kind {
        LinkKind::Backhaul => true,
        LinkKind::UeUeCross => false,
        _ => rng.gen::<f64>() < los_probability((d3 * d3 - dz * dz).max(0.0).sqrt()),
    };
    let mut gain_db = -pathloss_db(link.kind, d3, los, cfg)?;
    if cfg.shadowing {
        let sigma = if los { cfg.shadow_sigma_los_db } else { cfg.shadow_sigma_nlos_db };
        gain_db += sigma * standard_normal(rng);
    }
    // Element gains: sector pattern at base-station ends, evaluated at the
    // bearing from the station toward its peer; omnidirectional UEs; the
    // IAB end of the backhaul gets the peak gain (a dedicated panel aimed
    // at the gNB).
    gain_db += match link.kind {
        LinkKind::Backhaul => {
            sector_gain_db(az_rx_to_tx - link.rx_geom.orientation, cfg) + cfg.sector_max_gain_dbi
        }
        LinkKind::GnbAccess | LinkKind::IabAccess => {
            sector_gain_db(az_rx_to_tx - link.rx_geom.orientation, cfg)
        }
        LinkKind::UeUeCross => 0.0,
    };
    let total_power = db_to_linear(gain_db);

    let (n_clusters, n_paths) = match link.kind {
        LinkKind::Backhaul => (1, 1),
        _ => (cfg.n_clusters, cfg.n_paths),
    };
    // Per-cluster powers decay 3 dB per cluster, equal split within.
    let weights: Vec<f64> = (0..n_clusters).map(|c| 10f64.powf(-0.3 * c as f64)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut paths = Vec::with_capacity(n_clusters * n_paths);
    for (c, w) in weights.iter().enumerate() {
        let omega = total_power * w / (wsum * n_paths as f64);
        for l in 0..n_paths {
            let (aod, aoa) = if c == 0 && l == 0 {
                ([az_tx_to_rx, el_at_tx], [az_rx_to_tx, el_at_rx])
            } else {
                let az_s = cfg.azimuth_spread_deg.to_radians();
                let el_s = cfg.elevation_spread_deg.to_radians();
                (
                    [az_tx_to_rx + laplacian(rng, az_s), el_at_tx + laplacian(rng, el_s)],
                    [az_rx_to_tx + laplacian(rng, az_s), el_at_rx + laplacian(rng, el_s)],
                )
            };
            paths.push(PathComponent {
                amplitude: C64::new(0.0, 0.0),
                power: omega,
                aod,
                aoa,
            });
        }
    }
    for p in &mut paths {
        let s = (p.power / 2.0).sqrt();
        p.amplitude = C64::new(s * standard_normal(rng), s * standard_normal(rng));
    }
    let nt = link.tx_geom.total() as f64;
    let nr = link.rx_geom.total() as f64;
    let scale = (nt * nr / (n_clusters * n_paths) as f64).sqrt();
    let entries = channel_from_paths(&paths, &link.rx_geom, &link.tx_geom, scale);
    Ok(ChannelMatrix { entries, link_kind: link.kind, endpoints: (link.rx, link.tx) })
}

fn azimuth_from_to(from: &[f64; 3], to: &[f64; 3]) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Generate every channel matrix of one realization in a fixed order:
/// gNB-access links by UE index, the backhaul, IAB-access links by UE
/// index, then cross links with the IAB-UE index outermost.
pub fn build_channel_set(
    topology: &Topology,
    cfg: &SystemConfig,
    rng: &mut impl Rng,
) -> Result<ChannelSet> {
    let k = topology.k_gnb();
    let ktilde = topology.k_iab();
    let gnb_geom = ArrayGeometry::new(cfg.n_gnb, cfg.element_spacing, 0.0);
    let iab_access_geom = ArrayGeometry::new(cfg.n_iab, cfg.element_spacing, 0.0);
    // Dedicated backhaul panel at the IAB node, aimed back at the gNB.
    let iab_backhaul_geom = ArrayGeometry::new(
        cfg.n_iab,
        cfg.element_spacing,
        azimuth_from_to(&topology.iab_position, &topology.gnb_position),
    );
    let ue_geom = |idx: usize| {
        let serving = match topology.serving[idx] {
            crate::scenario::Serving::Gnb => &topology.gnb_position,
            crate::scenario::Serving::Iab => &topology.iab_position,
        };
        ArrayGeometry::new(
            cfg.n_ue,
            cfg.element_spacing,
            azimuth_from_to(&topology.ue_positions[idx], serving),
        )
    };

    let mut h_gnb_ue = Vec::with_capacity(k);
    for j in 0..k {
        h_gnb_ue.push(draw_channel(
            &LinkSpec {
                kind: LinkKind::GnbAccess,
                rx: NodeId::Gnb,
                tx: NodeId::Ue(j),
                rx_geom: gnb_geom,
                tx_geom: ue_geom(j),
                rx_pos: topology.gnb_position,
                tx_pos: topology.ue_positions[j],
            },
            cfg,
            rng,
        )?);
    }
    let h_backhaul = draw_channel(
        &LinkSpec {
            kind: LinkKind::Backhaul,
            rx: NodeId::Gnb,
            tx: NodeId::Iab,
            rx_geom: gnb_geom,
            tx_geom: iab_backhaul_geom,
            rx_pos: topology.gnb_position,
            tx_pos: topology.iab_position,
        },
        cfg,
        rng,
    )?;
    let mut h_iab_ue = Vec::with_capacity(ktilde);
    for i in 0..ktilde {
        let idx = k + i;
        h_iab_ue.push(draw_channel(
            &LinkSpec {
                kind: LinkKind::IabAccess,
                rx: NodeId::Iab,
                tx: NodeId::Ue(idx),
                rx_geom: iab_access_geom,
                tx_geom: ue_geom(idx),
                rx_pos: topology.iab_position,
                tx_pos: topology.ue_positions[idx],
            },
            cfg,
            rng,
        )?);
    }
    let mut h_cross = Vec::with_capacity(ktilde);
    for i in 0..ktilde {
        let iab_ue = k + i;
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            row.push(draw_channel(
                &LinkSpec {
                    kind: LinkKind::UeUeCross,
                    rx: NodeId::Ue(j),
                    tx: NodeId::Ue(iab_ue),
                    rx_geom: ue_geom(j),
                    tx_geom: ue_geom(iab_ue),
                    rx_pos: topology.ue_positions[j],
                    tx_pos: topology.ue_positions[iab_ue],
                },
                cfg,
                rng,
            )?);
        }
        h_cross.push(row);
    }
    Ok(ChannelSet { h_gnb_ue, h_backhaul, h_iab_ue, h_cross })
}
