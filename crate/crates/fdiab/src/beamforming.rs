//! SVD precoding, MRC combining, and reduction of a channel realization to
//! the scalar effective-gain table the SINR expressions and the power
//! optimizer consume.
//!
//! Beamformers are power-independent: precoders are dominant singular
//! vectors of their own link, combiners are matched filters to the desired
//! effective channel, and everything downstream works with the squared
//! scalar gains |v^H·H·f|².

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::linalg::{cdot, dominant_svd, C64};
use crate::scenario::SystemConfig;
use crate::{Error, Result};

/// Unit-norm transmit vectors. Indexing: `f_gnb[0]` is the gNB's downlink
/// backhaul stream (toward the IAB node), `f_gnb[1..=K]` its access
/// streams; `f_iab[0]` is the IAB node's uplink backhaul stream (toward
/// the gNB), `f_iab[1..=K̃]` its access streams; `f_ue[j]` is UE j's uplink
/// precoder (global order, gNB-area UEs first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderSet {
    /// gNB transmit vectors, length K+1.
    pub f_gnb: Vec<Array1<C64>>,
    /// IAB-node transmit vectors, length K̃+1.
    pub f_iab: Vec<Array1<C64>>,
    /// UE transmit vectors, length K+K̃.
    pub f_ue: Vec<Array1<C64>>,
}

/// Unnormalized maximum-ratio combiners, indexed like [`PrecoderSet`]:
/// `v_gnb[0]` receives the uplink backhaul, `v_gnb[1..=K]` the gNB-area
/// UE uplinks; `v_iab[0]` receives the downlink backhaul, `v_iab[1..=K̃]`
/// the IAB-area UE uplinks; `v_ue[j]` is UE j's downlink combiner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerSet {
    /// gNB receive vectors, length K+1.
    pub v_gnb: Vec<Array1<C64>>,
    /// IAB-node receive vectors, length K̃+1.
    pub v_iab: Vec<Array1<C64>>,
    /// UE receive vectors, length K+K̃.
    pub v_ue: Vec<Array1<C64>>,
}

/// Every squared scalar gain appearing in the SINR expressions, plus the
/// combiner norms and receiver noise powers. Row index = combiner
/// (receiver stream), column index = transmit stream. Index 0 on a base
/// station always means its backhaul stream; UE-block columns/rows are
/// 0-based within their area (gNB-area UE j, IAB-area UE i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    /// Number of gNB-area UEs (K).
    pub k: usize,
    /// Number of IAB-area UEs (K̃).
    pub ktilde: usize,
    /// (K+1)×K: gNB combiner c vs. gNB-area UE j's uplink transmission.
    pub gnb_from_ue: Array2<f64>,
    /// (K+1)×(K̃+1): gNB combiner c vs. IAB-node stream s over the backhaul.
    pub gnb_from_iab: Array2<f64>,
    /// (K̃+1)×K̃: IAB combiner c vs. IAB-area UE i's uplink transmission.
    pub iab_from_ue: Array2<f64>,
    /// (K̃+1)×(K+1): IAB combiner c vs. gNB stream s over the backhaul.
    pub iab_from_gnb: Array2<f64>,
    /// K×(K+1): gNB-area UE k's combiner vs. gNB stream s.
    pub ue_k_from_gnb: Array2<f64>,
    /// K×K̃: gNB-area UE k's combiner vs. IAB-area UE i's uplink (cross).
    pub ue_k_from_ue: Array2<f64>,
    /// K̃×(K̃+1): IAB-area UE i's combiner vs. IAB-node stream s.
    pub ue_i_from_iab: Array2<f64>,
    /// K̃×K: IAB-area UE i's combiner vs. gNB-area UE k's uplink (cross,
    /// reverse direction of the same matrix — conjugate transposed).
    pub ue_i_from_ue: Array2<f64>,
    /// ‖v_gnb[c]‖², length K+1.
    pub v_gnb_norm2: Vec<f64>,
    /// ‖v_iab[c]‖², length K̃+1.
    pub v_iab_norm2: Vec<f64>,
    /// ‖v_ue[j]‖², length K+K̃ (global UE order).
    pub v_ue_norm2: Vec<f64>,
    /// Noise power (W) at the gNB receiver.
    pub noise_gnb: f64,
    /// Noise power (W) at the IAB-node receiver.
    pub noise_iab: f64,
    /// Noise power (W) at every UE receiver.
    pub noise_ue: f64,
}

impl GainTable {
    /// Total scalar count (gain entries + combiner norms), excluding the
    /// three noise powers.
    pub fn scalar_count(&self) -> usize {
        self.gnb_from_ue.len()
            + self.gnb_from_iab.len()
            + self.iab_from_ue.len()
            + self.iab_from_gnb.len()
            + self.ue_k_from_gnb.len()
            + self.ue_k_from_ue.len()
            + self.ue_i_from_iab.len()
            + self.ue_i_from_ue.len()
            + self.v_gnb_norm2.len()
            + self.v_iab_norm2.len()
            + self.v_ue_norm2.len()
    }
}

/// Compute the dominant-singular-vector precoders for every link:
/// the gNB transmits to UE k along u₁(H_k) and to the IAB node along
/// u₁(H_0); UE j transmits along w₁ of its access channel; the IAB node
/// transmits to the gNB along w₁(H_0) and to its UE i along u₁(H_i).
/// Every vector is unit norm with the largest-magnitude entry pinned real
/// positive.
pub fn compute_precoders(channels: &ChannelSet) -> Result<PrecoderSet> {
    let k = channels.h_gnb_ue.len();
    let ktilde = channels.h_iab_ue.len();
    let backhaul = dominant_svd(&channels.h_backhaul.entries.view())?;
    let mut f_gnb = Vec::with_capacity(k + 1);
    f_gnb.push(backhaul.u.clone());
    let mut f_ue = vec![Array1::<C64>::zeros(0); k + ktilde];
    for (j, link) in channels.h_gnb_ue.iter().enumerate() {
        let svd = dominant_svd(&link.entries.view())?;
        f_gnb.push(svd.u);
        f_ue[j] = svd.v;
    }
    let mut f_iab = Vec::with_capacity(ktilde + 1);
    f_iab.push(backhaul.v);
    for (i, link) in channels.h_iab_ue.iter().enumerate() {
        let svd = dominant_svd(&link.entries.view())?;
        f_iab.push(svd.u);
        f_ue[k + i] = svd.v;
    }
    Ok(PrecoderSet { f_gnb, f_iab, f_ue })
}

fn herm_dot(h: &Array2<C64>, x: &Array1<C64>) -> Array1<C64> {
    // H^H·x without materializing H^H.
    let mut out = Array1::<C64>::zeros(h.ncols());
    for c in 0..h.ncols() {
        out[c] = h.column(c).iter().zip(x.iter()).map(|(hv, xv)| hv.conj() * xv).sum();
    }
    out
}

/// Maximum-ratio combiners: each receiver matches its desired effective
/// channel exactly (unnormalized): the gNB uses H_0·f_iab[0] for the
/// backhaul and H_k·f_ue[k] per access uplink; the IAB node uses
/// H_0^H·f_gnb[0] and H_i·f_ue[i]; UE k matches H_k^H·f_gnb[k] and UE i
/// matches H_i^H·f_iab[i].
pub fn compute_combiners(channels: &ChannelSet, precoders: &PrecoderSet) -> CombinerSet {
    let k = channels.h_gnb_ue.len();
    let ktilde = channels.h_iab_ue.len();
    let mut v_gnb = Vec::with_capacity(k + 1);
    v_gnb.push(channels.h_backhaul.entries.dot(&precoders.f_iab[0]));
    for (j, link) in channels.h_gnb_ue.iter().enumerate() {
        v_gnb.push(link.entries.dot(&precoders.f_ue[j]));
    }
    let mut v_iab = Vec::with_capacity(ktilde + 1);
    v_iab.push(herm_dot(&channels.h_backhaul.entries, &precoders.f_gnb[0]));
    for (i, link) in channels.h_iab_ue.iter().enumerate() {
        v_iab.push(link.entries.dot(&precoders.f_ue[k + i]));
    }
    let mut v_ue = Vec::with_capacity(k + ktilde);
    for (j, link) in channels.h_gnb_ue.iter().enumerate() {
        v_ue.push(herm_dot(&link.entries, &precoders.f_gnb[1 + j]));
    }
    for (i, link) in channels.h_iab_ue.iter().enumerate() {
        v_ue.push(herm_dot(&link.entries, &precoders.f_iab[1 + i]));
    }
    CombinerSet { v_gnb, v_iab, v_ue }
}

fn gain2(v: &Array1<C64>, effective: &Array1<C64>) -> f64 {
    cdot(&v.view(), &effective.view()).norm_sqr()
}

/// Reduce (channels, precoders, combiners) to every squared scalar gain
/// the SINR expressions reference, with combiner norms and noise powers.
pub fn build_gain_table(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    combiners: &CombinerSet,
    cfg: &SystemConfig,
) -> Result<GainTable> {
    let k = channels.h_gnb_ue.len();
    let ktilde = channels.h_iab_ue.len();
    if precoders.f_gnb.len() != k + 1 || precoders.f_iab.len() != ktilde + 1 {
        return Err(Error::Beamforming(format!(
            "precoder set sized for {}(+1) gNB / {}(+1) IAB streams, channels have K={k}, K̃={ktilde}",
            precoders.f_gnb.len() - 1,
            precoders.f_iab.len() - 1,
        )));
    }
    if precoders.f_ue.len() != k + ktilde
        || combiners.v_ue.len() != k + ktilde
        || combiners.v_gnb.len() != k + 1
        || combiners.v_iab.len() != ktilde + 1
    {
        return Err(Error::Beamforming("combiner/precoder UE counts inconsistent with channels".into()));
    }
    if channels.h_cross.len() != ktilde || channels.h_cross.iter().any(|row| row.len() != k) {
        let (i, got) = channels
            .h_cross
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != k)
            .map(|(i, row)| (i, row.len()))
            .unwrap_or((channels.h_cross.len(), 0));
        return Err(Error::Beamforming(format!(
            "cross-link block incomplete: IAB-area UE {i} has {got} of {k} gNB-area pairings"
        )));
    }

    // Effective transmitted vectors, computed once per (matrix, stream).
    let bh = &channels.h_backhaul.entries;
    let iab_tx_at_gnb: Vec<Array1<C64>> =
        precoders.f_iab.iter().map(|f| bh.dot(f)).collect();
    let gnb_tx_at_iab: Vec<Array1<C64>> =
        precoders.f_gnb.iter().map(|f| herm_dot(bh, f)).collect();

    let mut gnb_from_ue = Array2::<f64>::zeros((k + 1, k));
    let mut gnb_from_iab = Array2::<f64>::zeros((k + 1, ktilde + 1));
    for c in 0..=k {
        for (j, link) in channels.h_gnb_ue.iter().enumerate() {
            gnb_from_ue[(c, j)] =
                gain2(&combiners.v_gnb[c], &link.entries.dot(&precoders.f_ue[j]));
        }
        for (s, eff) in iab_tx_at_gnb.iter().enumerate() {
            gnb_from_iab[(c, s)] = gain2(&combiners.v_gnb[c], eff);
        }
    }
    let mut iab_from_ue = Array2::<f64>::zeros((ktilde + 1, ktilde));
    let mut iab_from_gnb = Array2::<f64>::zeros((ktilde + 1, k + 1));
    for c in 0..=ktilde {
        for (i, link) in channels.h_iab_ue.iter().enumerate() {
            iab_from_ue[(c, i)] =
                gain2(&combiners.v_iab[c], &link.entries.dot(&precoders.f_ue[k + i]));
        }
        for (s, eff) in gnb_tx_at_iab.iter().enumerate() {
            iab_from_gnb[(c, s)] = gain2(&combiners.v_iab[c], eff);
        }
    }
    let mut ue_k_from_gnb = Array2::<f64>::zeros((k, k + 1));
    let mut ue_k_from_ue = Array2::<f64>::zeros((k, ktilde));
    for (kk, link) in channels.h_gnb_ue.iter().enumerate() {
        for (s, f) in precoders.f_gnb.iter().enumerate() {
            ue_k_from_gnb[(kk, s)] = gain2(&combiners.v_ue[kk], &herm_dot(&link.entries, f));
        }
        for i in 0..ktilde {
            let cross = &channels.h_cross[i][kk].entries;
            ue_k_from_ue[(kk, i)] =
                gain2(&combiners.v_ue[kk], &cross.dot(&precoders.f_ue[k + i]));
        }
    }
    let mut ue_i_from_iab = Array2::<f64>::zeros((ktilde, ktilde + 1));
    let mut ue_i_from_ue = Array2::<f64>::zeros((ktilde, k));
    for (i, link) in channels.h_iab_ue.iter().enumerate() {
        for (s, f) in precoders.f_iab.iter().enumerate() {
            ue_i_from_iab[(i, s)] = gain2(&combiners.v_ue[k + i], &herm_dot(&link.entries, f));
        }
        for kk in 0..k {
            let cross = &channels.h_cross[i][kk].entries;
            ue_i_from_ue[(i, kk)] =
                gain2(&combiners.v_ue[k + i], &herm_dot(cross, &precoders.f_ue[kk]));
        }
    }
    let norm2 = |v: &Array1<C64>| v.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let noise = cfg.noise_power_w();
    Ok(GainTable {
        k,
        ktilde,
        gnb_from_ue,
        gnb_from_iab,
        iab_from_ue,
        iab_from_gnb,
        ue_k_from_gnb,
        ue_k_from_ue,
        ue_i_from_iab,
        ue_i_from_ue,
        v_gnb_norm2: combiners.v_gnb.iter().map(&norm2).collect(),
        v_iab_norm2: combiners.v_iab.iter().map(&norm2).collect(),
        v_ue_norm2: combiners.v_ue.iter().map(&norm2).collect(),
        noise_gnb: noise,
        noise_iab: noise,
        noise_ue: noise,
    })
}
