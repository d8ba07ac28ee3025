use std::collections::VecDeque;

use serde::Serialize;

use crate::system::DiscreteSystem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GaugeResult {
    /// `σ_i = ±1` with `σ_i σ_j m_ij ≤ 0` off the diagonal.
    pub sigma: Option<Vec<i32>>,
    /// Why no gauge exists: `MixedSign` or `Inconsistent`.
    pub reason: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Zero,
    Pos,
    Neg,
}

fn field_sign(values: impl Iterator<Item = f64>, tol: f64) -> Option<Sign> {
    let (mut pos, mut neg) = (false, false);
    for v in values {
        pos |= v > tol;
        neg |= v < -tol;
    }
    match (pos, neg) {
        (true, true) => None,
        (true, false) => Some(Sign::Pos),
        (false, true) => Some(Sign::Neg),
        (false, false) => Some(Sign::Zero),
    }
}

/// Sign gauge turning every off-diagonal coupling nonpositive, by parity
/// 2-coloring of the species graph.
pub fn find_gauge(sys: &DiscreteSystem, support_tol: f64) -> GaugeResult {
    let n = sys.n_species();
    let absent = |reason: &str| GaugeResult {
        sigma: None,
        reason: Some(reason.to_string()),
    };
    // parity[i][j]: Some(-1) forces σ_i σ_j = -1, Some(1) forces +1
    let mut parity = vec![vec![None::<i32>; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let want = match field_sign(sys.coupling_interior(i, j), support_tol) {
                None => return absent("MixedSign"),
                Some(Sign::Zero) => continue,
                Some(Sign::Pos) => -1,
                Some(Sign::Neg) => 1,
            };
            for (a, b) in [(i, j), (j, i)] {
                match parity[a][b] {
                    Some(p) if p != want => return absent("Inconsistent"),
                    _ => parity[a][b] = Some(want),
                }
            }
        }
    }
    let mut sigma = vec![0i32; n];
    for start in 0..n {
        if sigma[start] != 0 {
            continue;
        }
        sigma[start] = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let Some(p) = parity[i][j] else { continue };
                let want = p * sigma[i];
                if sigma[j] == 0 {
                    sigma[j] = want;
                    queue.push_back(j);
                } else if sigma[j] != want {
                    return absent("Inconsistent");
                }
            }
        }
    }
    GaugeResult {
        sigma: Some(sigma),
        reason: None,
    }
}

/// The system seen in the gauged order: `m_ij -> σ_i σ_j m_ij`.
pub fn gauged_system(sys: &DiscreteSystem, sigma: &[i32]) -> DiscreteSystem {
    let m = sys
        .m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, field)| {
                    let s = (sigma[i] * sigma[j]) as f64;
                    field.iter().map(|v| s * v).collect()
                })
                .collect()
        })
        .collect();
    sys.with_coupling(m)
}
