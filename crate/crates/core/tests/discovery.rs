mod common;

use std::collections::{BTreeMap, HashMap};

use common::*;
use lago_dr_core::clock::{from_unix, Clock, Timestamp};
use lago_dr_core::discovery::{
    browse, read_outbox, recommend, record_event, rss_feed, search, stats_report, Criterion, EventKind, MessageKind,
    SearchQuery, StatEvent,
};
use lago_dr_core::metadata::DataType;
use lago_dr_core::repo::{Item, ItemQuery, NewFile, NodeKind, Pid, Role};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// Seeded fixture with a spread of items across collections and people.
fn populated() -> Fixture {
    let f = seeded();
    let people = ["Ana Pérez", "Luis Mamani", "Rosa Díaz"];
    let specs = [
        "ve:ula:wcd-raw",
        "ve:ula:calibration",
        "bo:umsa:simulated",
        "mx:inaoe:wcd-raw",
        "bo:umsa:calibration",
    ];
    for i in 0..25 {
        let spec = specs[i % specs.len()];
        let mut rec = record(datatype_of(spec), &format!("item {i}"));
        rec.fields.retain(|x| !x.is("lago.responsible"));
        rec.push("lago.responsible", people[i % 3]);
        let roles = [Role::Data, Role::Calibration, Role::Graphic, Role::Postprocessed];
        let files = vec![
            NewFile::bytes(&format!("run-{i:03}.dat"), Role::Data, format!("d{i}").into_bytes()),
            NewFile::bytes(&format!("extra-{i}.bin"), roles[i % 4], format!("e{i}").into_bytes()),
        ];
        f.repo.add_item(f.collection(spec), rec, files).unwrap();
        f.clock.advance(i as i64 % 3);
    }
    // Withdrawn items never show up.
    f.repo.withdraw_item(Pid(4)).unwrap();
    f.repo.withdraw_item(Pid(11)).unwrap();
    f
}

fn visible(f: &Fixture) -> Vec<Item> {
    f.repo
        .list_items(&ItemQuery { include_withdrawn: true, ..Default::default() })
        .unwrap()
        .into_iter()
        .filter(|i| !i.withdrawn)
        .collect()
}

/// Newest first: datestamp descending, then pid descending.
fn newest_first(mut items: Vec<Item>) -> Vec<Pid> {
    items.sort_by(|a, b| (b.datestamp, b.pid).cmp(&(a.datestamp, a.pid)));
    items.into_iter().map(|i| i.pid).collect()
}

fn pids(items: &[Item]) -> Vec<Pid> {
    items.iter().map(|i| i.pid).collect()
}

#[test]
fn browse_by_country() {
    let f = populated();
    let groups = browse(&f.repo, Criterion::Country, Some("ve")).unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].label, "Venezuela");
    let oracle = newest_first(visible(&f).into_iter().filter(|i| i.set_spec.as_str().starts_with("ve:")).collect());
    assert!(!oracle.is_empty());
    assert_eq!(pids(&groups[0].items), oracle);

    let all = browse(&f.repo, Criterion::Country, None).unwrap();
    let keys: Vec<&str> = all.iter().map(|g| g.key.as_str()).collect();
    assert_eq!(keys, ["bo", "mx", "ve"]);
    assert_eq!(all.iter().map(|g| g.items.len()).sum::<usize>(), visible(&f).len());
}

#[test]
fn browse_by_responsible() {
    let f = populated();
    let groups = browse(&f.repo, Criterion::Responsible, Some("luis mamani")).unwrap();
    let oracle = newest_first(
        visible(&f).into_iter().filter(|i| i.record.first("lago.responsible") == Some("Luis Mamani")).collect(),
    );
    assert_eq!(pids(&groups[0].items), oracle);
    assert!(browse(&f.repo, Criterion::Responsible, Some("Nobody")).unwrap().is_empty());
}

#[test]
fn browse_by_filename() {
    let f = populated();
    let groups = browse(&f.repo, Criterion::Filename, Some("RUN-01")).unwrap();
    let oracle = newest_first(
        visible(&f)
            .into_iter()
            .filter(|i| i.bitstreams.iter().any(|b| b.filename.to_lowercase().contains("run-01")))
            .collect(),
    );
    assert_eq!(oracle.len(), 9);
    assert_eq!(pids(&groups[0].items), oracle);
}

#[test]
fn browse_by_filetype_matches_linear_scan() {
    let f = populated();
    let nodes: HashMap<_, _> = f.repo.nodes().unwrap().into_iter().map(|n| (n.id, n)).collect();
    for key in ["calibration", "graphic", "data", "wcd-raw", "simulated", "other"] {
        let got = browse(&f.repo, Criterion::Filetype, Some(key)).unwrap();
        let oracle = newest_first(
            visible(&f)
                .into_iter()
                .filter(|i| {
                    i.bitstreams.iter().any(|b| b.role.as_str() == key)
                        || nodes[&i.collection].datatype.map(|d| d.as_str()) == Some(key)
                })
                .collect(),
        );
        let got_pids = got.first().map(|g| pids(&g.items)).unwrap_or_default();
        assert_eq!(got_pids, oracle, "{key}");
    }
    assert_eq!("size".parse::<Criterion>().unwrap_err().code(), "UnknownCriterion");
}

#[test]
fn search_terms_and_facets() {
    let f = populated();
    let hits = search(&f.repo, &SearchQuery { q: "rosa ITEM".into(), ..Default::default() }).unwrap();
    let oracle = newest_first(
        visible(&f).into_iter().filter(|i| i.record.first("lago.responsible") == Some("Rosa Díaz")).collect(),
    );
    assert_eq!(pids(&hits), oracle);
    let hits = search(
        &f.repo,
        &SearchQuery { q: "run-".into(), set: Some("bo".into()), datatype: Some(DataType::Simulated), limit: Some(2) },
    )
    .unwrap();
    assert_eq!(hits.len(), 2);
    assert!(hits.iter().all(|i| i.set_spec.as_str() == "bo:umsa:simulated"));
}

#[test]
fn feeds_validate_and_follow_recency() {
    let f = populated();
    for node in f.repo.nodes().unwrap() {
        for k in [1, 3, 20] {
            let xml = rss_feed(&f.repo, node.set_spec.as_str(), k, "http://lago.example.org").unwrap();
            lago_xmlcheck::rss::validate(&xml).unwrap_or_else(|e| panic!("{}: {e:?}\n{xml}", node.set_spec));
            let doc = roxmltree::Document::parse(&xml).unwrap();
            let channel = doc.descendants().find(|n| n.has_tag_name("channel")).unwrap();
            let title = channel.children().find(|n| n.has_tag_name("title")).unwrap().text().unwrap();
            assert_eq!(title, node.name);
            let links: Vec<String> = channel
                .children()
                .filter(|n| n.has_tag_name("item"))
                .map(|i| i.children().find(|n| n.has_tag_name("link")).unwrap().text().unwrap().to_string())
                .collect();
            // Oracle: scan the subtree, sort by recency, keep k.
            let mut oracle = newest_first(visible(&f).into_iter().filter(|i| i.set_spec.is_within(node.set_spec.as_str())).collect());
            oracle.truncate(k);
            let expected: Vec<String> =
                oracle.iter().map(|p| format!("http://lago.example.org/ui/items/lago%2F{}", p.0)).collect();
            assert_eq!(links, expected, "{} k={k}", node.set_spec);

            // Feed/browse consistency at country level.
            if node.kind == NodeKind::Community {
                let listing = browse(&f.repo, Criterion::Country, Some(&node.slug)).unwrap();
                let top: Vec<Pid> = listing[0].items.iter().take(k).map(|i| i.pid).collect();
                assert_eq!(top, oracle);
            }
        }
    }
    assert_eq!(rss_feed(&f.repo, "zz", 5, "http://x").unwrap_err().code(), "UnknownSet");
}

#[test]
fn empty_collection_feed() {
    let f = seeded();
    let xml = rss_feed(&f.repo, "mx:inaoe:simulated", 20, "http://x").unwrap();
    lago_xmlcheck::rss::validate(&xml).unwrap();
    assert!(!xml.contains("<item>"));
}

#[test]
fn feed_orders_by_deposit_time() {
    let f = seeded();
    let coll = f.collection("ve:ula:simulated");
    let mut added = Vec::new();
    for t in 0..3 {
        added.push(f.repo.add_item(coll, record(DataType::Simulated, &format!("t{t}")), vec![data_file("a", &t.to_string())]).unwrap().pid);
        f.clock.advance(10);
    }
    let xml = rss_feed(&f.repo, "ve:ula:simulated", 2, "http://x").unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let titles: Vec<&str> = doc
        .descendants()
        .filter(|n| n.has_tag_name("item"))
        .map(|i| i.children().find(|n| n.has_tag_name("title")).unwrap().text().unwrap())
        .collect();
    assert_eq!(titles, ["t2", "t1"]);
}

#[test]
fn recommendations() {
    let f = populated();
    let msg = recommend(&f.repo, Pid(1), "friend@example.org", Some("Ana")).unwrap();
    assert_eq!(msg.kind, MessageKind::Recommendation);
    assert_eq!(read_outbox(&f.repo.outbox_dir()).unwrap(), vec![msg]);
    assert_eq!(recommend(&f.repo, Pid(1), "x@@y", None).unwrap_err().code(), "InvalidEmail");
    assert_eq!(recommend(&f.repo, Pid(4), "friend@example.org", None).unwrap_err().code(), "UnknownPid");
    assert_eq!(recommend(&f.repo, Pid(999), "friend@example.org", None).unwrap_err().code(), "UnknownPid");
}

fn t(s: i64) -> Timestamp {
    from_unix(1_210_000_000 + s)
}

#[test]
fn stats_examples() {
    let f = seeded();
    for _ in 0..3 {
        record_event(&f.repo, &StatEvent { kind: EventKind::Download, subject: "lago/5".into(), bitstream: Some(0), at: t(10) }).unwrap();
    }
    record_event(&f.repo, &StatEvent { kind: EventKind::Download, subject: "lago/2".into(), bitstream: Some(0), at: t(10) }).unwrap();
    let r = stats_report(&f.repo, t(0), t(100), 5).unwrap();
    assert_eq!(r.downloads, 4);
    assert_eq!(r.top_downloaded[0].subject, "lago/5");
    assert_eq!(r.top_downloaded[0].count, 3);

    let empty = stats_report(&f.repo, t(200), t(300), 5).unwrap();
    assert_eq!((empty.visits, empty.views, empty.downloads), (0, 0, 0));
    assert!(empty.top_downloaded.is_empty() && empty.top_viewed.is_empty());
    // Half-open: an event at `until` is excluded, at `from` included.
    assert_eq!(stats_report(&f.repo, t(0), t(10), 5).unwrap().downloads, 0);
    assert_eq!(stats_report(&f.repo, t(10), t(11), 5).unwrap().downloads, 4);
    assert_eq!(stats_report(&f.repo, t(5), t(4), 5).unwrap_err().code(), "BadInterval");
}

#[test]
fn top_k_ties_break_by_numeric_pid() {
    let f = seeded();
    for p in ["lago/10", "lago/9", "lago/100", "lago/9"] {
        record_event(&f.repo, &StatEvent { kind: EventKind::ItemView, subject: p.into(), bitstream: None, at: t(1) }).unwrap();
    }
    let r = stats_report(&f.repo, t(0), t(2), 10).unwrap();
    let order: Vec<&str> = r.top_viewed.iter().map(|x| x.subject.as_str()).collect();
    assert_eq!(order, ["lago/9", "lago/10", "lago/100"]);
}

/// Independent recount straight from the raw log.
fn brute_force(log: &[StatEvent], from: Timestamp, until: Timestamp, k: usize) -> (u64, u64, u64, Vec<(String, u64)>, Vec<(String, u64)>) {
    let in_window: Vec<&StatEvent> = log.iter().filter(|e| from <= e.at && e.at < until).collect();
    let count = |kind| in_window.iter().filter(|e| e.kind == kind).count() as u64;
    let top = |kind| {
        let mut m: BTreeMap<u64, u64> = BTreeMap::new();
        for e in in_window.iter().filter(|e| e.kind == kind) {
            *m.entry(e.subject.trim_start_matches("lago/").parse().unwrap()).or_default() += 1;
        }
        let mut v: Vec<(u64, u64)> = m.into_iter().collect();
        // BTreeMap iteration is pid-ascending; a stable sort by count keeps that for ties.
        v.sort_by(|a, b| b.1.cmp(&a.1));
        v.into_iter().take(k).map(|(p, c)| (format!("lago/{p}"), c)).collect::<Vec<_>>()
    };
    (count(EventKind::Visit), count(EventKind::ItemView), count(EventKind::Download), top(EventKind::Download), top(EventKind::ItemView))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn stats_replay_equivalence(seed in any::<u64>()) {
        let f = seeded();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut log = Vec::new();
        for _ in 0..300 {
            let kind = [EventKind::Visit, EventKind::ItemView, EventKind::Download][rng.gen_range(0..3)];
            let subject = match kind {
                EventKind::Visit => "site".to_string(),
                _ => format!("lago/{}", rng.gen_range(1..15)),
            };
            let e = StatEvent { kind, subject, bitstream: None, at: t(rng.gen_range(0..1000)) };
            record_event(&f.repo, &e).unwrap();
            log.push(e);
        }
        for _ in 0..20 {
            let a = rng.gen_range(0..1100);
            let b = rng.gen_range(a..=1100);
            let k = rng.gen_range(0..6);
            let r = stats_report(&f.repo, t(a), t(b), k).unwrap();
            let (v, iv, d, td, tv) = brute_force(&log, t(a), t(b), k);
            prop_assert_eq!((r.visits, r.views, r.downloads), (v, iv, d));
            prop_assert_eq!(r.top_downloaded.into_iter().map(|x| (x.subject, x.count)).collect::<Vec<_>>(), td);
            prop_assert_eq!(r.top_viewed.into_iter().map(|x| (x.subject, x.count)).collect::<Vec<_>>(), tv);
        }
    }
}

#[test]
fn clock_is_used_for_events() {
    let f = seeded();
    let e = StatEvent::now(&f.repo, EventKind::Visit, "site");
    assert_eq!(e.at, f.clock.now());
}
