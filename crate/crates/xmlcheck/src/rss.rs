//! Structural RSS 2.0 conformance.
//!
//! Checks the rules of the RSS 2.0 specification (RSS Advisory Board,
//! 2009 revision): a single `channel` with the three required elements,
//! only known children in the null namespace, items carrying a title or a
//! description, RFC 822 dates, absolute URLs for links, and well-formed
//! `guid`/`enclosure`/`category` attributes. Namespaced extension elements
//! are permitted anywhere.

use roxmltree::{Document, Node};

const CHANNEL_CHILDREN: &[&str] = &[
    "title",
    "link",
    "description",
    "language",
    "copyright",
    "managingEditor",
    "webMaster",
    "pubDate",
    "lastBuildDate",
    "category",
    "generator",
    "docs",
    "cloud",
    "ttl",
    "image",
    "rating",
    "textInput",
    "skipHours",
    "skipDays",
    "item",
];

const ITEM_CHILDREN: &[&str] = &[
    "title",
    "link",
    "description",
    "author",
    "category",
    "comments",
    "enclosure",
    "guid",
    "pubDate",
    "source",
];

/// Validates `xml` as an RSS 2.0 document, returning every violation found.
pub fn validate(xml: &str) -> Result<(), Vec<String>> {
    let doc = Document::parse(xml).map_err(|e| vec![format!("not well-formed: {e}")])?;
    let mut errors = Vec::new();
    let root = doc.root_element();
    if root.tag_name().name() != "rss" || root.tag_name().namespace().is_some() {
        errors.push("root element must be <rss> in no namespace".to_string());
    }
    if root.attribute("version") != Some("2.0") {
        errors.push("rss/@version must be \"2.0\"".to_string());
    }
    let channels: Vec<Node<'_, '_>> = plain_children(&root).collect();
    if channels.len() != 1 || channels[0].tag_name().name() != "channel" {
        errors.push("rss must contain exactly one <channel>".to_string());
        return Err(errors);
    }
    let channel = channels[0];
    for required in ["title", "link", "description"] {
        if count(&channel, required) != 1 {
            errors.push(format!("channel must have exactly one <{required}>"));
        }
    }
    for child in plain_children(&channel) {
        let name = child.tag_name().name();
        if !CHANNEL_CHILDREN.contains(&name) {
            errors.push(format!("channel: unknown element <{name}>"));
            continue;
        }
        match name {
            "item" => check_item(&child, &mut errors),
            "link" | "docs" => check_url(&child, "channel", &mut errors),
            "pubDate" | "lastBuildDate" => check_date(&child, "channel", &mut errors),
            "ttl" => {
                if text(&child).trim().parse::<u32>().is_err() {
                    errors.push("channel/ttl must be a non-negative integer".to_string());
                }
            }
            "category" => check_category(&child, "channel", &mut errors),
            _ => {}
        }
        if !matches!(name, "item" | "image" | "cloud" | "textInput" | "skipHours" | "skipDays")
            && plain_children(&child).next().is_some()
        {
            errors.push(format!("channel/{name} must not contain elements"));
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn check_item(item: &Node<'_, '_>, errors: &mut Vec<String>) {
    if count(item, "title") == 0 && count(item, "description") == 0 {
        errors.push("item must have at least one of <title> or <description>".to_string());
    }
    for single in ["title", "link", "description", "author", "comments", "enclosure", "guid", "pubDate", "source"] {
        if count(item, single) > 1 {
            errors.push(format!("item has more than one <{single}>"));
        }
    }
    for child in plain_children(item) {
        let name = child.tag_name().name();
        if !ITEM_CHILDREN.contains(&name) {
            errors.push(format!("item: unknown element <{name}>"));
            continue;
        }
        if plain_children(&child).next().is_some() {
            errors.push(format!("item/{name} must not contain elements"));
        }
        match name {
            "link" | "comments" => check_url(&child, "item", errors),
            "pubDate" => check_date(&child, "item", errors),
            "category" => check_category(&child, "item", errors),
            "guid" => {
                let permalink = child.attribute("isPermaLink").unwrap_or("true");
                if !matches!(permalink, "true" | "false") {
                    errors.push("item/guid/@isPermaLink must be true or false".to_string());
                }
                if permalink == "true" && !is_absolute_url(text(&child).trim()) {
                    errors.push("item/guid is a permalink but not an absolute URL".to_string());
                }
                if text(&child).trim().is_empty() {
                    errors.push("item/guid must not be empty".to_string());
                }
            }
            "enclosure" => {
                let url_ok = child.attribute("url").is_some_and(is_absolute_url);
                let len_ok = child.attribute("length").is_some_and(|l| l.parse::<u64>().is_ok());
                let type_ok = child.attribute("type").is_some_and(|t| t.contains('/'));
                if !(url_ok && len_ok && type_ok) {
                    errors.push("item/enclosure requires url, length and type".to_string());
                }
            }
            "source" => {
                if !child.attribute("url").is_some_and(is_absolute_url) {
                    errors.push("item/source requires an absolute url attribute".to_string());
                }
            }
            _ => {}
        }
    }
}

fn check_url(node: &Node<'_, '_>, parent: &str, errors: &mut Vec<String>) {
    let value = text(node);
    if !is_absolute_url(value.trim()) {
        errors.push(format!("{parent}/{}: {value:?} is not an absolute URL", node.tag_name().name()));
    }
}

fn check_date(node: &Node<'_, '_>, parent: &str, errors: &mut Vec<String>) {
    let value = text(node);
    if chrono::DateTime::parse_from_rfc2822(value.trim()).is_err() {
        errors.push(format!("{parent}/{}: {value:?} is not an RFC 822 date", node.tag_name().name()));
    }
}

fn check_category(node: &Node<'_, '_>, parent: &str, errors: &mut Vec<String>) {
    if text(node).trim().is_empty() {
        errors.push(format!("{parent}/category must not be empty"));
    }
}

fn is_absolute_url(value: &str) -> bool {
    match value.split_once("://") {
        Some((scheme, rest)) => {
            !scheme.is_empty()
                && scheme.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
                && !rest.is_empty()
                && !value.chars().any(char::is_whitespace)
        }
        None => false,
    }
}

fn plain_children<'a, 'input>(node: &Node<'a, 'input>) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(|c| c.is_element() && c.tag_name().namespace().is_none())
}

fn count(node: &Node<'_, '_>, name: &str) -> usize {
    plain_children(node).filter(|c| c.tag_name().name() == name).count()
}

fn text(node: &Node<'_, '_>) -> String {
    node.children().filter_map(|c| c.text()).collect()
}
