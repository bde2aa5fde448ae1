//! Click-event ingestion and per-(site, link) visit counters.
//!
//! Every link keeps two numbers: a lifetime visit count and a windowed
//! recent count backed by a fixed ring of time buckets. The window slides
//! in bucket-sized steps: an event is charged to the bucket containing its
//! quantized timestamp, and a recent-count query sums the buckets whose
//! start lies inside the half-open window `(now - window_length, now]`.
//! An event at exactly `now` therefore always counts; events a full window
//! old never do.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{IdError, LinkId, SiteId};

/// One week of seconds: the default recent window.
pub const DEFAULT_WINDOW_LENGTH: u64 = 604_800;
/// One hour of seconds: the default bucket width (168 buckets per window).
pub const DEFAULT_BUCKET_WIDTH: u64 = 3_600;

#[derive(Debug, Error)]
pub enum CounterError {
    #[error(transparent)]
    InvalidId(#[from] IdError),
    #[error("window_length {window} must be a positive multiple of bucket_width {width}")]
    InvalidWindow { window: u64, width: u64 },
    #[error("site {site} already has recorded events; window override must precede ingestion")]
    SiteNotEmpty { site: SiteId },
    #[error(
        "timestamp {ts} for {site}{link} regresses more than one window behind newest bucket {newest}"
    )]
    TimestampRegression {
        site: SiteId,
        link: LinkId,
        ts: u64,
        newest: u64,
    },
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("unknown link {site}{link}")]
    UnknownLink { site: SiteId, link: LinkId },
}

/// One recorded visit of a link within a site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub ts: u64,
    pub site: SiteId,
    pub link: LinkId,
}

impl ClickEvent {
    pub fn new(ts: u64, site: SiteId, link: LinkId) -> Self {
        ClickEvent { ts, site, link }
    }
}

/// Ring of per-bucket counts covering exactly one window.
///
/// Bucket starts are multiples of `width`; slot assignment is
/// `(start / width) % len`, so a bucket keeps its slot across rotations.
#[derive(Debug, Clone)]
struct BucketRing {
    width: u64,
    buckets: Box<[u64]>,
    newest_start: u64,
}

impl BucketRing {
    fn new(width: u64, len: usize, first_ts: u64) -> Self {
        let mut ring = BucketRing {
            width,
            buckets: vec![0; len].into_boxed_slice(),
            newest_start: 0,
        };
        ring.newest_start = ring.quantize(first_ts);
        ring
    }

    fn quantize(&self, ts: u64) -> u64 {
        ts - ts % self.width
    }

    fn len(&self) -> u64 {
        self.buckets.len() as u64
    }

    fn window(&self) -> u64 {
        self.width * self.len()
    }

    fn slot(&self, bucket_start: u64) -> usize {
        ((bucket_start / self.width) % self.len()) as usize
    }

    /// Charges one event to the bucket containing `ts`. Fails when the
    /// bucket has already rotated out of the ring.
    fn record(&mut self, ts: u64) -> Result<(), u64> {
        let bucket = self.quantize(ts);
        if bucket > self.newest_start {
            let steps = (bucket - self.newest_start) / self.width;
            if steps >= self.len() {
                self.buckets.fill(0);
            } else {
                for s in 1..=steps {
                    let entering = self.newest_start + s * self.width;
                    self.buckets[self.slot(entering)] = 0;
                }
            }
            self.newest_start = bucket;
        } else if (self.newest_start - bucket) / self.width >= self.len() {
            return Err(self.newest_start);
        }
        let slot = self.slot(bucket);
        self.buckets[slot] = self.buckets[slot].saturating_add(1);
        Ok(())
    }

    /// Sums buckets whose start lies in `(now - window, now]`.
    fn recent(&self, now: u64) -> u64 {
        let window = self.window() as u128;
        let q_now = self.quantize(now);
        let mut total = 0u64;
        for off in 0..self.len() {
            let Some(bucket) = q_now.checked_sub(off * self.width) else {
                break;
            };
            if bucket as u128 + window <= now as u128 {
                break;
            }
            if bucket > self.newest_start || self.newest_start - bucket >= self.window() {
                continue;
            }
            total = total.saturating_add(self.buckets[self.slot(bucket)]);
        }
        total
    }
}

/// Per-link state: lifetime count plus the recent-window ring.
#[derive(Debug, Clone)]
pub struct LinkCounters {
    history: u64,
    ring: BucketRing,
}

impl LinkCounters {
    fn new(width: u64, buckets: usize, first_ts: u64) -> Self {
        LinkCounters {
            history: 0,
            ring: BucketRing::new(width, buckets, first_ts),
        }
    }

    pub fn history_count(&self) -> u64 {
        self.history
    }

    pub fn recent_count(&self, now: u64) -> u64 {
        self.ring.recent(now)
    }

    fn record(&mut self, ts: u64) -> Result<(), u64> {
        self.ring.record(ts)?;
        self.history = self.history.saturating_add(1);
        Ok(())
    }
}

#[derive(Debug)]
struct SiteEntry {
    window_length: u64,
    bucket_width: u64,
    launch_ts: u64,
    links: RwLock<HashMap<LinkId, Mutex<LinkCounters>>>,
}

impl SiteEntry {
    fn new(window_length: u64, bucket_width: u64, launch_ts: u64) -> Self {
        SiteEntry {
            window_length,
            bucket_width,
            launch_ts,
            links: RwLock::new(HashMap::new()),
        }
    }

    fn bucket_count(&self) -> usize {
        (self.window_length / self.bucket_width) as usize
    }
}

/// Concurrent store of counters for any number of sites and links.
///
/// Writers hold the outer lock shared for the whole update, so
/// [`CounterStore::snapshot`] (which takes it exclusively) observes a state
/// with no write in flight: a consistent cut of the serialized write order.
/// Updates to different links proceed concurrently behind per-link mutexes.
#[derive(Debug)]
pub struct CounterStore {
    window_length: u64,
    bucket_width: u64,
    sites: RwLock<HashMap<SiteId, Arc<SiteEntry>>>,
}

impl Default for CounterStore {
    fn default() -> Self {
        CounterStore::new()
    }
}

impl CounterStore {
    pub fn new() -> Self {
        CounterStore::with_window(DEFAULT_WINDOW_LENGTH, DEFAULT_BUCKET_WIDTH)
            .expect("default window is valid")
    }

    pub fn with_window(window_length: u64, bucket_width: u64) -> Result<Self, CounterError> {
        validate_window(window_length, bucket_width)?;
        Ok(CounterStore {
            window_length,
            bucket_width,
            sites: RwLock::new(HashMap::new()),
        })
    }

    pub fn window_length(&self) -> u64 {
        self.window_length
    }

    pub fn bucket_width(&self) -> u64 {
        self.bucket_width
    }

    /// Overrides the recent window for one site. Only allowed before the
    /// site has recorded any event, since all rings within a site must
    /// share one geometry.
    pub fn set_site_window(
        &self,
        site: SiteId,
        window_length: u64,
        bucket_width: u64,
    ) -> Result<(), CounterError> {
        validate_window(window_length, bucket_width)?;
        let mut sites = self.sites.write();
        if let Some(entry) = sites.get(&site) {
            if !entry.links.read().is_empty() {
                return Err(CounterError::SiteNotEmpty { site });
            }
        }
        sites.insert(site, Arc::new(SiteEntry::new(window_length, bucket_width, 0)));
        Ok(())
    }

    /// Timestamp of the first event seen for `site`, if any.
    pub fn site_launch(&self, site: &SiteId) -> Option<u64> {
        let sites = self.sites.read();
        let entry = sites.get(site)?;
        if entry.links.read().is_empty() {
            None
        } else {
            Some(entry.launch_ts)
        }
    }

    /// Records one click. Unseen sites and links are registered on first
    /// sight. Events may arrive late as long as their bucket is still in
    /// the ring; anything older is a [`CounterError::TimestampRegression`].
    pub fn record_click(&self, event: &ClickEvent) -> Result<(), CounterError> {
        // Fast path: site and link already registered. The outer read guard
        // is held across the whole mutation; see the type-level comment.
        {
            let sites = self.sites.read();
            if let Some(entry) = sites.get(&event.site) {
                let links = entry.links.read();
                if let Some(counters) = links.get(&event.link) {
                    return apply(counters, event);
                }
                drop(links);
                let mut links = entry.links.write();
                let counters = links.entry(event.link.clone()).or_insert_with(|| {
                    Mutex::new(LinkCounters::new(
                        entry.bucket_width,
                        entry.bucket_count(),
                        event.ts,
                    ))
                });
                return apply(counters, event);
            }
        }
        // Registration path: create the site under the exclusive lock.
        let mut sites = self.sites.write();
        let entry = sites.entry(event.site.clone()).or_insert_with(|| {
            Arc::new(SiteEntry::new(
                self.window_length,
                self.bucket_width,
                event.ts,
            ))
        });
        let mut links = entry.links.write();
        let counters = links.entry(event.link.clone()).or_insert_with(|| {
            Mutex::new(LinkCounters::new(
                entry.bucket_width,
                entry.bucket_count(),
                event.ts,
            ))
        });
        apply(counters, event)
    }

    /// Lifetime count for one link.
    pub fn history_count(&self, site: &SiteId, link: &LinkId) -> Result<u64, CounterError> {
        self.with_link(site, link, |c| c.history_count())
    }

    /// Windowed count for one link, resolved at `now`.
    pub fn recent_count(&self, site: &SiteId, link: &LinkId, now: u64) -> Result<u64, CounterError> {
        self.with_link(site, link, |c| c.recent_count(now))
    }

    fn with_link<T>(
        &self,
        site: &SiteId,
        link: &LinkId,
        f: impl FnOnce(&LinkCounters) -> T,
    ) -> Result<T, CounterError> {
        let sites = self.sites.read();
        let entry = sites
            .get(site)
            .ok_or_else(|| CounterError::UnknownSite(site.clone()))?;
        let links = entry.links.read();
        let counters = links.get(link).ok_or_else(|| CounterError::UnknownLink {
            site: site.clone(),
            link: link.clone(),
        })?;
        let value = f(&counters.lock());
        Ok(value)
    }

    /// Immutable point-in-time view of every counter, resolved at `now`.
    pub fn snapshot(&self, now: u64) -> CounterSnapshot {
        let sites = self.sites.write();
        let mut out = BTreeMap::new();
        for (site, entry) in sites.iter() {
            let links = entry.links.read();
            if links.is_empty() {
                continue;
            }
            let mut rows = BTreeMap::new();
            for (link, counters) in links.iter() {
                let c = counters.lock();
                rows.insert(
                    link.clone(),
                    LinkCounts {
                        history: c.history_count(),
                        recent: c.recent_count(now),
                    },
                );
            }
            out.insert(site.clone(), rows);
        }
        CounterSnapshot { now, sites: out }
    }

    /// Replays a JSONL click log. Malformed or regressing lines are
    /// collected as diagnostics and skipped; only an unreadable stream is
    /// fatal. `slack` is the tolerated backwards jump between consecutive
    /// log lines, in seconds.
    pub fn load_events(
        &self,
        reader: impl BufRead,
        slack: u64,
    ) -> Result<IngestReport, std::io::Error> {
        let mut report = IngestReport::default();
        let mut max_ts: Option<u64> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let event: ClickEvent = match serde_json::from_str(&line) {
                Ok(event) => event,
                Err(err) => {
                    report.errors.push(LineDiagnostic {
                        line: lineno,
                        message: err.to_string(),
                    });
                    continue;
                }
            };
            if let Some(max) = max_ts {
                if event.ts < max.saturating_sub(slack) {
                    report.errors.push(LineDiagnostic {
                        line: lineno,
                        message: format!(
                            "timestamp {} regresses more than {slack}s behind {max}",
                            event.ts
                        ),
                    });
                    continue;
                }
            }
            match self.record_click(&event) {
                Ok(()) => {
                    max_ts = Some(max_ts.map_or(event.ts, |m| m.max(event.ts)));
                    report.ingested += 1;
                }
                Err(err) => report.errors.push(LineDiagnostic {
                    line: lineno,
                    message: err.to_string(),
                }),
            }
        }
        report.last_ts = max_ts;
        Ok(report)
    }
}

fn apply(counters: &Mutex<LinkCounters>, event: &ClickEvent) -> Result<(), CounterError> {
    counters
        .lock()
        .record(event.ts)
        .map_err(|newest| CounterError::TimestampRegression {
            site: event.site.clone(),
            link: event.link.clone(),
            ts: event.ts,
            newest,
        })
}

fn validate_window(window_length: u64, bucket_width: u64) -> Result<(), CounterError> {
    if bucket_width == 0 || window_length == 0 || !window_length.is_multiple_of(bucket_width) {
        return Err(CounterError::InvalidWindow {
            window: window_length,
            width: bucket_width,
        });
    }
    Ok(())
}

/// Resolved `(history, recent)` pair for one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounts {
    pub history: u64,
    pub recent: u64,
}

/// Immutable view of all counters resolved at one query time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CounterSnapshot {
    now: u64,
    sites: BTreeMap<SiteId, BTreeMap<LinkId, LinkCounts>>,
}

impl CounterSnapshot {
    pub fn empty(now: u64) -> Self {
        CounterSnapshot {
            now,
            sites: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = &SiteId> {
        self.sites.keys()
    }

    pub fn site(&self, site: &SiteId) -> Option<&BTreeMap<LinkId, LinkCounts>> {
        self.sites.get(site)
    }

    pub fn counts(&self, site: &SiteId, link: &LinkId) -> Option<LinkCounts> {
        self.sites.get(site)?.get(link).copied()
    }

    /// Replaces one site's rows, e.g. with counters fetched from a remote
    /// instance. The snapshot's `now` is left unchanged.
    pub fn merge_site(&mut self, site: SiteId, rows: BTreeMap<LinkId, LinkCounts>) {
        self.sites.insert(site, rows);
    }
}

/// Outcome of replaying a click log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub ingested: u64,
    /// Latest accepted event timestamp, if any line was ingested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_ts: Option<u64>,
    pub errors: Vec<LineDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}
