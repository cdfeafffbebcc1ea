//! Read-side services over the local repository: browse and search, RSS
//! feeds, subscriptions and the notification outbox, usage statistics.

mod browse;
mod feed;
mod notify;
mod stats;

pub use browse::{browse, search, BrowseGroup, Criterion, SearchQuery};
pub use feed::{rss_feed, DEFAULT_FEED_K};
pub use notify::{
    is_email, on_deposit, read_outbox, recommend, subscribe, subscribers, MessageKind, OutboxMessage,
};
pub use stats::{event_span, record_event, stats_report, EventKind, Ranked, StatEvent, StatsReport};
