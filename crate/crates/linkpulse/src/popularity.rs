//! Local link popularity within a site.
//!
//! Historical importance of a link is its lifetime count divided by the
//! summed lifetime counts of all *other* links in the same site; current
//! importance is the same ratio over recent counts. Both are ratios
//! against the rest of the site, not shares of a total, so values above
//! 1.0 are normal. When a site has no other counted links the denominator
//! is zero and the value is degenerate rather than infinite.
//!
//! Placement uses a third number: the product of lifetime and recent
//! counts. Links with a zero product never earn a slot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counters::CounterSnapshot;
use crate::ids::{LinkId, SiteId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PopularityError {
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("unknown link {site}{link}")]
    UnknownLink { site: SiteId, link: LinkId },
    #[error("degenerate denominator for {site}{link}: no other counted links")]
    DegenerateDenominator { site: SiteId, link: LinkId },
}

/// Popularity numbers for one link. `hi`/`ci` are `None` when degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalScore {
    pub history: u64,
    pub recent: u64,
    pub product: u128,
    pub hi: Option<f64>,
    pub ci: Option<f64>,
}

/// The ordered top-k slot block for one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageLayout {
    pub site: SiteId,
    pub k: usize,
    pub generated_at: u64,
    pub slots: Vec<LayoutSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSlot {
    pub link: LinkId,
    pub history: u64,
    pub recent: u64,
    pub product: u128,
    pub hi: Option<f64>,
    pub ci: Option<f64>,
}

/// Historical importance of `link` relative to the rest of its site.
pub fn historical_importance(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    link: &LinkId,
) -> Result<f64, PopularityError> {
    let score = local_score(snapshot, site, link)?;
    score.hi.ok_or_else(|| PopularityError::DegenerateDenominator {
        site: site.clone(),
        link: link.clone(),
    })
}

/// Current importance of `link` relative to the rest of its site.
pub fn current_importance(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    link: &LinkId,
) -> Result<f64, PopularityError> {
    let score = local_score(snapshot, site, link)?;
    score.ci.ok_or_else(|| PopularityError::DegenerateDenominator {
        site: site.clone(),
        link: link.clone(),
    })
}

/// history x recent, the placement score. Zero if either factor is zero.
pub fn product_score(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    link: &LinkId,
) -> Result<u128, PopularityError> {
    Ok(local_score(snapshot, site, link)?.product)
}

/// Full [`LocalScore`] for one link.
pub fn local_score(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    link: &LinkId,
) -> Result<LocalScore, PopularityError> {
    let rows = snapshot
        .site(site)
        .ok_or_else(|| PopularityError::UnknownSite(site.clone()))?;
    let counts = rows.get(link).ok_or_else(|| PopularityError::UnknownLink {
        site: site.clone(),
        link: link.clone(),
    })?;
    let total_history: u128 = rows.values().map(|c| c.history as u128).sum();
    let total_recent: u128 = rows.values().map(|c| c.recent as u128).sum();
    Ok(score_one(
        counts.history,
        counts.recent,
        total_history,
        total_recent,
    ))
}

/// Scores every link of `site` in one pass. Rows come back in link order.
pub fn site_scores(
    snapshot: &CounterSnapshot,
    site: &SiteId,
) -> Result<Vec<(LinkId, LocalScore)>, PopularityError> {
    let rows = snapshot
        .site(site)
        .ok_or_else(|| PopularityError::UnknownSite(site.clone()))?;
    let total_history: u128 = rows.values().map(|c| c.history as u128).sum();
    let total_recent: u128 = rows.values().map(|c| c.recent as u128).sum();
    Ok(rows
        .iter()
        .map(|(link, counts)| {
            (
                link.clone(),
                score_one(counts.history, counts.recent, total_history, total_recent),
            )
        })
        .collect())
}

fn score_one(history: u64, recent: u64, total_history: u128, total_recent: u128) -> LocalScore {
    LocalScore {
        history,
        recent,
        product: history as u128 * recent as u128,
        hi: ratio_to_rest(history, total_history),
        ci: ratio_to_rest(recent, total_recent),
    }
}

// Denominator is the site total minus this link's own count. Integer
// sums keep the division correctly rounded, so equal counts over n links
// give exactly 1/(n-1).
fn ratio_to_rest(own: u64, total: u128) -> Option<f64> {
    let rest = total - own as u128;
    if rest == 0 {
        None
    } else {
        Some(own as f64 / rest as f64)
    }
}

/// Links with a positive product, ordered by product descending, then
/// recent count descending, then link id ascending; at most `k` entries.
pub fn top_k_links(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    k: usize,
) -> Result<Vec<(LinkId, LocalScore)>, PopularityError> {
    let mut scored: Vec<(LinkId, LocalScore)> = site_scores(snapshot, site)?
        .into_iter()
        .filter(|(_, s)| s.product > 0)
        .collect();
    scored.sort_by(|a, b| {
        b.1.product
            .cmp(&a.1.product)
            .then(b.1.recent.cmp(&a.1.recent))
            .then(a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Builds the slot block for `site`, stamped with the snapshot time.
pub fn page_layout(
    snapshot: &CounterSnapshot,
    site: &SiteId,
    k: usize,
) -> Result<PageLayout, PopularityError> {
    let slots = top_k_links(snapshot, site, k)?
        .into_iter()
        .map(|(link, s)| LayoutSlot {
            link,
            history: s.history,
            recent: s.recent,
            product: s.product,
            hi: s.hi,
            ci: s.ci,
        })
        .collect();
    Ok(PageLayout {
        site: site.clone(),
        k,
        generated_at: snapshot.now(),
        slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counters::{ClickEvent, CounterStore};

    fn site(s: &str) -> SiteId {
        SiteId::new(s).unwrap()
    }

    fn link(l: &str) -> LinkId {
        LinkId::new(l).unwrap()
    }

    /// Snapshot with the given per-link (history, recent) pairs, built by
    /// replaying synthetic events through a real store.
    fn snapshot_of(counts: &[(&str, u64, u64)]) -> CounterSnapshot {
        // Window of 100s: "recent" events at t=1000, history-only ones at t=0.
        let store = CounterStore::with_window(100, 10).unwrap();
        for (l, history, recent) in counts {
            assert!(history >= recent);
            let lid = link(l);
            for _ in 0..history - recent {
                store
                    .record_click(&ClickEvent::new(0, site("s"), lid.clone()))
                    .unwrap();
            }
            for _ in 0..*recent {
                store
                    .record_click(&ClickEvent::new(1000, site("s"), lid.clone()))
                    .unwrap();
            }
        }
        store.snapshot(1000)
    }

    #[test]
    fn equal_counts_two_links_give_one() {
        for c in [1, 5, 913] {
            let snap = snapshot_of(&[("/i", c, c), ("/o", c, c)]);
            assert_eq!(
                historical_importance(&snap, &site("s"), &link("/i")).unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn symmetric_site_gives_exact_reciprocal_share() {
        for n in 2..12u64 {
            let names: Vec<String> = (0..n).map(|i| format!("/l{i}")).collect();
            let rows: Vec<(&str, u64, u64)> = names.iter().map(|l| (l.as_str(), 7, 7)).collect();
            let snap = snapshot_of(&rows);
            for l in &names {
                let hi = historical_importance(&snap, &site("s"), &link(l)).unwrap();
                assert_eq!(hi, 1.0 / (n - 1) as f64);
            }
        }
    }

    #[test]
    fn asymmetric_hand_values() {
        let snap = snapshot_of(&[("/i", 3, 3), ("/a", 1, 1)]);
        assert_eq!(
            historical_importance(&snap, &site("s"), &link("/i")).unwrap(),
            3.0
        );
        assert_eq!(
            historical_importance(&snap, &site("s"), &link("/a")).unwrap(),
            1.0 / 3.0
        );
    }

    #[test]
    fn current_importance_hand_values() {
        let snap = snapshot_of(&[("/x", 4, 4), ("/y", 2, 2)]);
        assert_eq!(
            current_importance(&snap, &site("s"), &link("/x")).unwrap(),
            2.0
        );
        assert_eq!(
            current_importance(&snap, &site("s"), &link("/y")).unwrap(),
            0.5
        );
    }

    #[test]
    fn single_link_site_is_degenerate() {
        let snap = snapshot_of(&[("/only", 5, 5)]);
        assert!(matches!(
            historical_importance(&snap, &site("s"), &link("/only")),
            Err(PopularityError::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn expired_site_is_degenerate_for_current_importance() {
        // All events far older than the window.
        let store = CounterStore::with_window(100, 10).unwrap();
        for l in ["/a", "/b"] {
            store
                .record_click(&ClickEvent::new(0, site("s"), link(l)))
                .unwrap();
        }
        let snap = store.snapshot(10_000);
        for l in ["/a", "/b"] {
            assert!(matches!(
                current_importance(&snap, &site("s"), &link(l)),
                Err(PopularityError::DegenerateDenominator { .. })
            ));
            // Historical importance is still defined.
            historical_importance(&snap, &site("s"), &link(l)).unwrap();
        }
    }

    #[test]
    fn zero_recent_elsewhere_is_degenerate_for_the_live_link() {
        let snap = snapshot_of(&[("/i", 5, 3), ("/a", 5, 0)]);
        assert!(matches!(
            current_importance(&snap, &site("s"), &link("/i")),
            Err(PopularityError::DegenerateDenominator { .. })
        ));
        assert_eq!(
            current_importance(&snap, &site("s"), &link("/a")).unwrap(),
            0.0
        );
    }

    #[test]
    fn unknown_site_and_link_errors() {
        let snap = snapshot_of(&[("/a", 1, 1)]);
        assert!(matches!(
            local_score(&snap, &site("nope"), &link("/a")),
            Err(PopularityError::UnknownSite(_))
        ));
        assert!(matches!(
            local_score(&snap, &site("s"), &link("/nope")),
            Err(PopularityError::UnknownLink { .. })
        ));
    }

    #[test]
    fn product_hand_values() {
        let snap = snapshot_of(&[("/a", 10, 3), ("/b", 5, 0), ("/c", 1, 1)]);
        assert_eq!(product_score(&snap, &site("s"), &link("/a")).unwrap(), 30);
        assert_eq!(product_score(&snap, &site("s"), &link("/b")).unwrap(), 0);
        assert_eq!(product_score(&snap, &site("s"), &link("/c")).unwrap(), 1);
    }

    #[test]
    fn top_k_breaks_product_ties_by_recent_then_link() {
        // products: /a=30 (h=10,r=3), /b=30 (h=6,r=5), /c=10 (h=10,r=1)
        let snap = snapshot_of(&[("/a", 10, 3), ("/b", 6, 5), ("/c", 10, 1)]);
        let top = top_k_links(&snap, &site("s"), 2).unwrap();
        let names: Vec<&str> = top.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(names, ["/b", "/a"]);
    }

    #[test]
    fn top_k_larger_than_site_returns_all_active() {
        let snap = snapshot_of(&[("/a", 2, 1), ("/b", 1, 1)]);
        let top = top_k_links(&snap, &site("s"), 10).unwrap();
        assert_eq!(top.len(), 2);
    }

    #[test]
    fn zero_products_are_excluded() {
        let snap = snapshot_of(&[("/a", 5, 0), ("/b", 3, 0)]);
        assert!(top_k_links(&snap, &site("s"), 3).unwrap().is_empty());
    }

    #[test]
    fn layout_wraps_top_k_and_roundtrips() {
        let snap = snapshot_of(&[("/a", 10, 3), ("/b", 6, 5), ("/c", 10, 1)]);
        let layout = page_layout(&snap, &site("s"), 2).unwrap();
        assert_eq!(layout.generated_at, 1000);
        assert_eq!(layout.slots.len(), 2);
        assert_eq!(layout.slots[0].link.as_str(), "/b");
        let json = serde_json::to_string(&layout).unwrap();
        let back: PageLayout = serde_json::from_str(&json).unwrap();
        assert_eq!(back, layout);
    }

    #[test]
    fn layout_for_empty_site_has_no_slots() {
        let snap = snapshot_of(&[("/a", 5, 0)]);
        let layout = page_layout(&snap, &site("s"), 3).unwrap();
        assert!(layout.slots.is_empty());
        assert!(matches!(
            page_layout(&snap, &site("missing"), 3),
            Err(PopularityError::UnknownSite(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn count_table() -> impl Strategy<Value = Vec<(u64, u64)>> {
            proptest::collection::vec((0u64..200, 0u64..200), 2..10)
                .prop_map(|v| v.into_iter().map(|(h, r)| (h.max(r), r)).collect())
        }

        fn snap_from_table(table: &[(u64, u64)]) -> CounterSnapshot {
            let rows: Vec<(String, u64, u64)> = table
                .iter()
                .enumerate()
                .map(|(i, &(h, r))| (format!("/l{i}"), h, r))
                .collect();
            let borrowed: Vec<(&str, u64, u64)> =
                rows.iter().map(|(l, h, r)| (l.as_str(), *h, *r)).collect();
            snapshot_of(&borrowed)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            /// Scaling every count by one positive factor leaves HI and the
            /// top-k ordering unchanged.
            #[test]
            fn scale_invariance(table in count_table(), factor in 1u64..5) {
                let base = snap_from_table(&table);
                let scaled_table: Vec<(u64, u64)> = table
                    .iter()
                    .map(|&(h, r)| (h * factor, r * factor))
                    .collect();
                let scaled = snap_from_table(&scaled_table);

                for i in 0..table.len() {
                    let l = link(&format!("/l{i}"));
                    let a = local_score(&base, &site("s"), &l).unwrap();
                    let b = local_score(&scaled, &site("s"), &l).unwrap();
                    match (a.hi, b.hi) {
                        (None, None) => {}
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0)),
                        _ => prop_assert!(false, "degeneracy changed under scaling"),
                    }
                }
                let order = |s: &CounterSnapshot| -> Vec<String> {
                    top_k_links(s, &site("s"), table.len())
                        .unwrap()
                        .into_iter()
                        .map(|(l, _)| l.as_str().to_string())
                        .collect()
                };
                prop_assert_eq!(order(&base), order(&scaled));
            }

            /// In a two-link site with nonzero counts, hi(a) * hi(b) = 1.
            #[test]
            fn reciprocal_pair(h1 in 1u64..10_000, h2 in 1u64..10_000) {
                let snap = snapshot_of(&[("/a", h1, h1), ("/b", h2, h2)]);
                let a = historical_importance(&snap, &site("s"), &link("/a")).unwrap();
                let b = historical_importance(&snap, &site("s"), &link("/b")).unwrap();
                prop_assert!((a * b - 1.0).abs() < 1e-12);
            }

            /// top_k output is a prefix of the full sorted list.
            #[test]
            fn top_k_is_sorted_prefix(table in count_table(), k in 1usize..12) {
                let snap = snap_from_table(&table);
                let full = top_k_links(&snap, &site("s"), table.len()).unwrap();
                let top = top_k_links(&snap, &site("s"), k).unwrap();
                prop_assert_eq!(&full[..top.len()], &top[..]);
                prop_assert!(top.len() <= k);
            }
        }
    }
}
