//! Built-in order and receipt feed: two independent Poisson streams.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::config::OrdersConfig;
use crate::ids::Sku;
use crate::rng::{labeled_rng, SimRng};
use crate::world::OrderLine;

/// Probabilities of 1..=max lines for a geometric law truncated at `max`,
/// with its success parameter tuned so the mean is `mean`.
pub fn truncated_geometric(mean: f64, max: u32) -> Vec<f64> {
    let max = max.max(1);
    let k_max = f64::from(max);
    let probs = |p: f64| -> Vec<f64> {
        let w: Vec<f64> = (0..max).map(|k| (1.0 - p).powi(k as i32)).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    };
    let mean_of = |ps: &[f64]| ps.iter().enumerate().map(|(k, q)| (k + 1) as f64 * q).sum::<f64>();
    if mean <= 1.0 {
        return probs(1.0);
    }
    if mean >= (k_max + 1.0) / 2.0 {
        return probs(0.0);
    }
    // Mean falls monotonically in p.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_of(&probs(mid)) > mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    probs(0.5 * (lo + hi))
}

fn pick_weighted(rng: &mut SimRng, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        if x < *w {
            return Some(i);
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0)
}

struct Stream {
    rng: SimRng,
    exp: Option<Exp<f64>>,
    next_at: f64,
}

impl Stream {
    fn new(seed: u64, label: &str, per_hour: f64) -> Self {
        let exp = (per_hour > 0.0).then(|| Exp::new(per_hour / 3600.0).expect("positive rate"));
        Self {
            rng: labeled_rng(seed, label),
            exp,
            next_at: 0.0,
        }
    }

    fn advance(&mut self, until: f64) -> Option<f64> {
        let exp = self.exp.as_ref()?;
        self.next_at += exp.sample(&mut self.rng);
        (self.next_at <= until).then_some(self.next_at)
    }
}

pub struct OrderGenerator {
    orders: Stream,
    receipts: Stream,
    skus: Vec<Sku>,
    weights: Vec<f64>,
    line_probs: Vec<f64>,
    max_quantity: u32,
    bundles_per_receipt: u32,
    bundle_quantity: u32,
    until: f64,
}

impl OrderGenerator {
    /// `skus` are the catalogue used when the config gives no weights.
    pub fn new(cfg: &OrdersConfig, skus: &[Sku], seed: u64) -> Self {
        let seed = cfg.seed.unwrap_or(seed);
        let (skus, weights): (Vec<Sku>, Vec<f64>) = if cfg.sku_weights.is_empty() {
            skus.iter().map(|s| (s.clone(), 1.0)).unzip()
        } else {
            cfg.sku_weights
                .iter()
                .map(|(s, w)| (Sku::new(s.clone()), w.max(0.0)))
                .unzip()
        };
        Self {
            orders: Stream::new(seed, "orders", cfg.rate_per_hour),
            receipts: Stream::new(seed, "receipts", cfg.receipts_per_hour),
            skus,
            weights,
            line_probs: truncated_geometric(cfg.mean_lines, cfg.max_lines),
            max_quantity: cfg.max_quantity.max(1),
            bundles_per_receipt: cfg.bundles_per_receipt.max(1),
            bundle_quantity: cfg.bundle_quantity.max(1),
            until: cfg.until_s.unwrap_or(f64::INFINITY),
        }
    }

    /// Next order arrival time and its lines, or `None` once the stream ends.
    pub fn next_order(&mut self) -> Option<(f64, Vec<OrderLine>)> {
        let at = self.orders.advance(self.until)?;
        let rng = &mut self.orders.rng;
        let n = pick_weighted(rng, &self.line_probs).unwrap_or(0) + 1;
        let mut w = self.weights.clone();
        let mut lines = Vec::with_capacity(n);
        for _ in 0..n {
            let Some(i) = pick_weighted(rng, &w) else {
                break;
            };
            w[i] = 0.0;
            lines.push(OrderLine {
                sku: self.skus[i].clone(),
                quantity: rng.random_range(1..=self.max_quantity),
            });
        }
        Some((at, lines))
    }

    /// Next receipt time and its bundles as (sku, quantity).
    pub fn next_receipt(&mut self) -> Option<(f64, Vec<(Sku, u32)>)> {
        let at = self.receipts.advance(self.until)?;
        let rng = &mut self.receipts.rng;
        let bundles = (0..self.bundles_per_receipt)
            .filter_map(|_| pick_weighted(rng, &self.weights))
            .map(|i| (self.skus[i].clone(), self.bundle_quantity))
            .collect();
        Some((at, bundles))
    }
}
