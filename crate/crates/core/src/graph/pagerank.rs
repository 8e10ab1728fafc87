/// Power-iteration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// PageRank by power iteration over out-neighbour lists (repeats count as
/// parallel links). Dangling nodes spread their mass uniformly. Stops when
/// the L1 change drops below `tol` or after `max_iter` sweeps.
pub fn pagerank(out_links: &[Vec<usize>], cfg: &PageRankConfig) -> Vec<f64> {
    let n = out_links.len();
    if n == 0 {
        return Vec::new();
    }
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0; n];
    for _ in 0..cfg.max_iter {
        let dangling: f64 = out_links
            .iter()
            .zip(&rank)
            .filter(|(links, _)| links.is_empty())
            .map(|(_, r)| r)
            .sum();
        let base = (1.0 - cfg.damping) * uniform + cfg.damping * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for (src, links) in out_links.iter().enumerate() {
            if links.is_empty() {
                continue;
            }
            let share = cfg.damping * rank[src] / links.len() as f64;
            for &dst in links {
                next[dst] += share;
            }
        }
        let delta: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < cfg.tol {
            break;
        }
    }
    rank
}
