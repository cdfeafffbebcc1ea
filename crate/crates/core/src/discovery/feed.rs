use crate::clock::Timestamp;
use crate::error::Result;
use crate::repo::{Item, ItemQuery, Pid, Repository};
use crate::xmlutil::XmlOut;

pub const DEFAULT_FEED_K: usize = 20;

/// Portal page of an item.
pub fn item_url(base_url: &str, pid: Pid) -> String {
    format!("{}/ui/items/lago%2F{}", base_url.trim_end_matches('/'), pid.0)
}

fn rfc822(t: &Timestamp) -> String {
    t.format("%a, %d %b %Y %H:%M:%S GMT").to_string()
}

/// RSS 2.0 channel of the `k` newest visible items at or below `set_spec`.
pub fn rss_feed(repo: &Repository, set_spec: &str, k: usize, base_url: &str) -> Result<String> {
    let node = repo.node_by_set(set_spec)?;
    let items = repo.list_items(&ItemQuery {
        set: Some(set_spec.to_string()),
        newest_first: true,
        limit: Some(k.max(1)),
        ..Default::default()
    })?;
    let base = base_url.trim_end_matches('/');
    let built = items.first().map_or_else(|| repo.now(), |i| i.datestamp);

    let mut out = XmlOut::new(Vec::new());
    (|| -> std::io::Result<()> {
        out.decl()?;
        out.start("rss", &[("version", "2.0"), ("xmlns:atom", "http://www.w3.org/2005/Atom")])?;
        out.start("channel", &[])?;
        out.leaf("title", &[], &node.name)?;
        out.leaf("link", &[], &format!("{base}/ui/sets/{set_spec}"))?;
        out.leaf("description", &[], &format!("Latest deposits in {} ({set_spec})", node.name))?;
        let self_url = format!("{base}/feeds/{set_spec}.rss");
        out.empty(
            "atom:link",
            &[("href", &self_url), ("rel", "self"), ("type", "application/rss+xml")],
        )?;
        out.leaf("lastBuildDate", &[], &rfc822(&built))?;
        for item in &items {
            write_item(&mut out, item, base)?;
        }
        out.end("channel")?;
        out.end("rss")
    })()
    .expect("writing to memory");
    Ok(String::from_utf8(out.into_inner()).expect("utf-8 output"))
}

fn write_item(out: &mut XmlOut<Vec<u8>>, item: &Item, base: &str) -> std::io::Result<()> {
    let link = item_url(base, item.pid);
    out.start("item", &[])?;
    out.leaf("title", &[], item.record.first("dc.title").unwrap_or(""))?;
    out.leaf("link", &[], &link)?;
    let mut description = String::new();
    if let Some(who) = item.record.first("lago.responsible") {
        description.push_str(&format!("Responsible: {who}. "));
    }
    description.push_str(&format!("{} file(s).", item.bitstreams.len()));
    if let Some(d) = item.record.first("dc.description") {
        description.push(' ');
        description.push_str(d);
    }
    out.leaf("description", &[], &description)?;
    out.leaf("category", &[], item.set_spec.as_str())?;
    out.leaf("guid", &[("isPermaLink", "true")], &link)?;
    out.leaf("pubDate", &[], &rfc822(&item.datestamp))?;
    out.end("item")
}
