//! A W3C XML Schema 1.0 subset validator.
//!
//! Supported: global and local element declarations, element and attribute
//! references, named and anonymous complex types (sequence, choice, all,
//! model groups, wildcards, simple content extension, complex content
//! extension/restriction, mixed content), attribute groups, and simple types
//! built by restriction (enumeration, pattern, length facets), union and list
//! over the common built-in datatypes. Identity constraints, substitution
//! groups and `xsi:type` are not supported; the schemas this crate checks do
//! not use them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use regex::Regex;
use roxmltree::{Document, Node};

const XS: &str = "http://www.w3.org/2001/XMLSchema";
const XSI: &str = "http://www.w3.org/2001/XMLSchema-instance";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("reading schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing schema {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported schema construct in {path}: {message}")]
    Unsupported { path: String, message: String },
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct QName {
    ns: String,
    local: String,
}

impl QName {
    fn new(ns: &str, local: &str) -> Self {
        QName {
            ns: ns.to_string(),
            local: local.to_string(),
        }
    }
}

impl fmt::Debug for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ns.is_empty() {
            write!(f, "{}", self.local)
        } else {
            write!(f, "{{{}}}{}", self.ns, self.local)
        }
    }
}

#[derive(Debug, Clone)]
enum TypeRef {
    Named(QName),
    Anon(usize),
    /// `xs:anyType`, also used when a declaration carries no type.
    Any,
}

#[derive(Debug)]
enum TypeDef {
    Simple(SimpleType),
    Complex(ComplexType),
}

#[derive(Debug)]
enum SimpleType {
    Restriction {
        base: TypeRef,
        enumerations: Vec<String>,
        patterns: Vec<Regex>,
        min_length: Option<usize>,
        max_length: Option<usize>,
    },
    Union(Vec<TypeRef>),
    List(TypeRef),
}

#[derive(Debug)]
enum Content {
    Empty,
    Simple(TypeRef),
    Elements(Particle),
}

#[derive(Debug)]
struct ComplexType {
    mixed: bool,
    content: Content,
    attributes: Vec<AttrUse>,
    attribute_groups: Vec<QName>,
    any_attribute: bool,
    /// Complex content extension: the base content precedes ours.
    extends: Option<QName>,
}

#[derive(Debug, Clone)]
struct AttrUse {
    name: QName,
    ty: TypeRef,
    required: bool,
    prohibited: bool,
    /// Set when the use refers to a global attribute declaration.
    global_ref: bool,
}

#[derive(Debug, Clone)]
struct Particle {
    term: Term,
    min: u32,
    max: Option<u32>,
}

#[derive(Debug, Clone)]
enum Term {
    Element(ElementDecl),
    ElementRef(QName),
    Any { ns: NsConstraint, process: Process },
    Sequence(Vec<Particle>),
    Choice(Vec<Particle>),
    All(Vec<Particle>),
    Group(QName),
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: QName,
    ty: TypeRef,
}

#[derive(Debug, Clone)]
enum NsConstraint {
    Any,
    Other(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Process {
    Strict,
    Lax,
    Skip,
}

/// A set of loaded schema documents, keyed by target namespace.
#[derive(Debug, Default)]
pub struct SchemaSet {
    types: Vec<TypeDef>,
    named_types: HashMap<QName, usize>,
    elements: BTreeMap<QName, ElementDecl>,
    attributes: HashMap<QName, TypeRef>,
    attribute_groups: HashMap<QName, (Vec<AttrUse>, Vec<QName>)>,
    groups: HashMap<QName, Particle>,
}

struct Ctx<'a> {
    path: &'a str,
    target_ns: String,
    elements_qualified: bool,
    attributes_qualified: bool,
}

impl SchemaSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every schema document in `paths`. Imports are resolved by
    /// namespace against the other documents in the set; `schemaLocation`
    /// hints are ignored.
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self, SchemaError> {
        let mut set = Self::new();
        for path in paths {
            set.add_file(path.as_ref())?;
        }
        Ok(set)
    }

    pub fn add_file(&mut self, path: &Path) -> Result<(), SchemaError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.add_str(&path.display().to_string(), &text)
    }

    pub fn add_str(&mut self, name: &str, text: &str) -> Result<(), SchemaError> {
        let doc = Document::parse(text).map_err(|e| SchemaError::Parse {
            path: name.to_string(),
            message: e.to_string(),
        })?;
        let root = doc.root_element();
        if !is_xs(&root, "schema") {
            return Err(SchemaError::Parse {
                path: name.to_string(),
                message: "root element is not xs:schema".into(),
            });
        }
        let ctx = Ctx {
            path: name,
            target_ns: root.attribute("targetNamespace").unwrap_or("").to_string(),
            elements_qualified: root.attribute("elementFormDefault") == Some("qualified"),
            attributes_qualified: root.attribute("attributeFormDefault") == Some("qualified"),
        };
        for child in root.children().filter(|n| n.is_element()) {
            if child.tag_name().namespace() != Some(XS) {
                continue;
            }
            match child.tag_name().name() {
                "annotation" | "import" | "include" | "notation" => {}
                "element" => {
                    let decl = self.element_decl(&ctx, &child, true)?;
                    self.elements.insert(decl.name.clone(), decl);
                }
                "complexType" => {
                    let name = required_attr(&ctx, &child, "name")?;
                    let def = self.complex_type(&ctx, &child)?;
                    let idx = self.push_type(TypeDef::Complex(def));
                    self.named_types.insert(QName::new(&ctx.target_ns, name), idx);
                }
                "simpleType" => {
                    let name = required_attr(&ctx, &child, "name")?;
                    let def = self.simple_type(&ctx, &child)?;
                    let idx = self.push_type(TypeDef::Simple(def));
                    self.named_types.insert(QName::new(&ctx.target_ns, name), idx);
                }
                "group" => {
                    let name = required_attr(&ctx, &child, "name")?;
                    let particle = self.group_body(&ctx, &child)?;
                    self.groups.insert(QName::new(&ctx.target_ns, name), particle);
                }
                "attribute" => {
                    let name = required_attr(&ctx, &child, "name")?;
                    let ty = self.attribute_type(&ctx, &child)?;
                    self.attributes.insert(QName::new(&ctx.target_ns, name), ty);
                }
                "attributeGroup" => {
                    let name = required_attr(&ctx, &child, "name")?;
                    let mut uses = Vec::new();
                    let mut refs = Vec::new();
                    for a in child.children().filter(|n| n.is_element()) {
                        self.attribute_item(&ctx, &a, &mut uses, &mut refs, &mut false)?;
                    }
                    self.attribute_groups
                        .insert(QName::new(&ctx.target_ns, name), (uses, refs));
                }
                other => {
                    return Err(SchemaError::Unsupported {
                        path: ctx.path.to_string(),
                        message: format!("top-level xs:{other}"),
                    })
                }
            }
        }
        Ok(())
    }

    fn push_type(&mut self, def: TypeDef) -> usize {
        self.types.push(def);
        self.types.len() - 1
    }

    fn element_decl(
        &mut self,
        ctx: &Ctx<'_>,
        node: &Node<'_, '_>,
        global: bool,
    ) -> Result<ElementDecl, SchemaError> {
        let name = required_attr(ctx, node, "name")?;
        let qualified = global
            || match node.attribute("form") {
                Some(form) => form == "qualified",
                None => ctx.elements_qualified,
            };
        let ns = if qualified { ctx.target_ns.as_str() } else { "" };
        let ty = if let Some(t) = node.attribute("type") {
            TypeRef::Named(resolve_qname(ctx, node, t)?)
        } else if let Some(ct) = xs_child(node, "complexType") {
            let def = self.complex_type(ctx, &ct)?;
            TypeRef::Anon(self.push_type(TypeDef::Complex(def)))
        } else if let Some(st) = xs_child(node, "simpleType") {
            let def = self.simple_type(ctx, &st)?;
            TypeRef::Anon(self.push_type(TypeDef::Simple(def)))
        } else {
            TypeRef::Any
        };
        Ok(ElementDecl {
            name: QName::new(ns, name),
            ty,
        })
    }

    fn attribute_type(&mut self, ctx: &Ctx<'_>, node: &Node<'_, '_>) -> Result<TypeRef, SchemaError> {
        if let Some(t) = node.attribute("type") {
            Ok(TypeRef::Named(resolve_qname(ctx, node, t)?))
        } else if let Some(st) = xs_child(node, "simpleType") {
            let def = self.simple_type(ctx, &st)?;
            Ok(TypeRef::Anon(self.push_type(TypeDef::Simple(def))))
        } else {
            Ok(TypeRef::Named(QName::new(XS, "anySimpleType")))
        }
    }

    fn attribute_item(
        &mut self,
        ctx: &Ctx<'_>,
        node: &Node<'_, '_>,
        uses: &mut Vec<AttrUse>,
        groups: &mut Vec<QName>,
        any_attribute: &mut bool,
    ) -> Result<bool, SchemaError> {
        if node.tag_name().namespace() != Some(XS) {
            return Ok(false);
        }
        match node.tag_name().name() {
            "attribute" => {
                let required = node.attribute("use") == Some("required");
                let prohibited = node.attribute("use") == Some("prohibited");
                if let Some(r) = node.attribute("ref") {
                    let name = resolve_qname(ctx, node, r)?;
                    uses.push(AttrUse {
                        name,
                        ty: TypeRef::Any,
                        required,
                        prohibited,
                        global_ref: true,
                    });
                } else {
                    let name = required_attr(ctx, node, "name")?;
                    let qualified = match node.attribute("form") {
                        Some(form) => form == "qualified",
                        None => ctx.attributes_qualified,
                    };
                    let ns = if qualified { ctx.target_ns.as_str() } else { "" };
                    let ty = self.attribute_type(ctx, node)?;
                    uses.push(AttrUse {
                        name: QName::new(ns, name),
                        ty,
                        required,
                        prohibited,
                        global_ref: false,
                    });
                }
                Ok(true)
            }
            "attributeGroup" => {
                let r = required_attr(ctx, node, "ref")?;
                groups.push(resolve_qname(ctx, node, r)?);
                Ok(true)
            }
            "anyAttribute" => {
                *any_attribute = true;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn complex_type(&mut self, ctx: &Ctx<'_>, node: &Node<'_, '_>) -> Result<ComplexType, SchemaError> {
        let mut ct = ComplexType {
            mixed: node.attribute("mixed") == Some("true"),
            content: Content::Empty,
            attributes: Vec::new(),
            attribute_groups: Vec::new(),
            any_attribute: false,
            extends: None,
        };
        for child in node.children().filter(|n| n.is_element()) {
            if child.tag_name().namespace() != Some(XS) {
                continue;
            }
            match child.tag_name().name() {
                "annotation" => {}
                "sequence" | "choice" | "all" | "group" => {
                    ct.content = Content::Elements(self.particle(ctx, &child)?);
                }
                "simpleContent" => {
                    let deriv = first_xs_element(&child).ok_or_else(|| unsupported(ctx, "empty simpleContent"))?;
                    let base = resolve_qname(ctx, &deriv, required_attr(ctx, &deriv, "base")?)?;
                    match deriv.tag_name().name() {
                        "extension" => ct.content = Content::Simple(TypeRef::Named(base)),
                        "restriction" => {
                            let def = self.simple_restriction(ctx, &deriv, TypeRef::Named(base))?;
                            ct.content = Content::Simple(TypeRef::Anon(self.push_type(TypeDef::Simple(def))));
                        }
                        other => return Err(unsupported(ctx, &format!("simpleContent/{other}"))),
                    }
                    for a in deriv.children().filter(|n| n.is_element()) {
                        self.attribute_item(ctx, &a, &mut ct.attributes, &mut ct.attribute_groups, &mut ct.any_attribute)?;
                    }
                }
                "complexContent" => {
                    if child.attribute("mixed") == Some("true") {
                        ct.mixed = true;
                    }
                    let deriv = first_xs_element(&child).ok_or_else(|| unsupported(ctx, "empty complexContent"))?;
                    let base = resolve_qname(ctx, &deriv, required_attr(ctx, &deriv, "base")?)?;
                    let extension = match deriv.tag_name().name() {
                        "extension" => true,
                        "restriction" => false,
                        other => return Err(unsupported(ctx, &format!("complexContent/{other}"))),
                    };
                    if extension && base != QName::new(XS, "anyType") {
                        ct.extends = Some(base);
                    }
                    for d in deriv.children().filter(|n| n.is_element()) {
                        if d.tag_name().namespace() != Some(XS) {
                            continue;
                        }
                        match d.tag_name().name() {
                            "sequence" | "choice" | "all" | "group" => {
                                ct.content = Content::Elements(self.particle(ctx, &d)?);
                            }
                            _ => {
                                self.attribute_item(ctx, &d, &mut ct.attributes, &mut ct.attribute_groups, &mut ct.any_attribute)?;
                            }
                        }
                    }
                }
                _ => {
                    if !self.attribute_item(ctx, &child, &mut ct.attributes, &mut ct.attribute_groups, &mut ct.any_attribute)? {
                        return Err(unsupported(ctx, &format!("complexType/{}", child.tag_name().name())));
                    }
                }
            }
        }
        Ok(ct)
    }

    fn group_body(&mut self, ctx: &Ctx<'_>, node: &Node<'_, '_>) -> Result<Particle, SchemaError> {
        let inner = node
            .children()
            .filter(|n| n.is_element() && n.tag_name().namespace() == Some(XS))
            .find(|n| matches!(n.tag_name().name(), "sequence" | "choice" | "all"))
            .ok_or_else(|| unsupported(ctx, "group without model group"))?;
        self.particle(ctx, &inner)
    }

    fn particle(&mut self, ctx: &Ctx<'_>, node: &Node<'_, '_>) -> Result<Particle, SchemaError> {
        let min = match node.attribute("minOccurs") {
            Some(v) => v.parse().map_err(|_| unsupported(ctx, "minOccurs"))?,
            None => 1,
        };
        let max = match node.attribute("maxOccurs") {
            Some("unbounded") => None,
            Some(v) => Some(v.parse().map_err(|_| unsupported(ctx, "maxOccurs"))?),
            None => Some(1),
        };
        let term = match node.tag_name().name() {
            "element" => {
                if let Some(r) = node.attribute("ref") {
                    Term::ElementRef(resolve_qname(ctx, node, r)?)
                } else {
                    Term::Element(self.element_decl(ctx, node, false)?)
                }
            }
            "any" => {
                let ns = match node.attribute("namespace").unwrap_or("##any") {
                    "##any" => NsConstraint::Any,
                    "##other" => NsConstraint::Other(ctx.target_ns.clone()),
                    list => NsConstraint::List(
                        list.split_whitespace()
                            .map(|s| match s {
                                "##targetNamespace" => ctx.target_ns.clone(),
                                "##local" => String::new(),
                                uri => uri.to_string(),
                            })
                            .collect(),
                    ),
                };
                let process = match node.attribute("processContents").unwrap_or("strict") {
                    "lax" => Process::Lax,
                    "skip" => Process::Skip,
                    _ => Process::Strict,
                };
                Term::Any { ns, process }
            }
            "group" => Term::Group(resolve_qname(ctx, node, required_attr(ctx, node, "ref")?)?),
            kind @ ("sequence" | "choice" | "all") => {
                let mut parts = Vec::new();
                for c in node.children().filter(|n| n.is_element()) {
                    if c.tag_name().namespace() == Some(XS) && c.tag_name().name() != "annotation" {
                        parts.push(self.particle(ctx, &c)?);
                    }
                }
                match kind {
                    "sequence" => Term::Sequence(parts),
                    "choice" => Term::Choice(parts),
                    _ => Term::All(parts),
                }
            }
            other => return Err(unsupported(ctx, &format!("particle xs:{other}"))),
        };
        Ok(Particle { term, min, max })
    }

    fn simple_type(&mut self, ctx: &Ctx<'_>, node: &Node<'_, '_>) -> Result<SimpleType, SchemaError> {
        let body = first_xs_element(node).ok_or_else(|| unsupported(ctx, "empty simpleType"))?;
        match body.tag_name().name() {
            "restriction" => {
                let base = if let Some(b) = body.attribute("base") {
                    TypeRef::Named(resolve_qname(ctx, &body, b)?)
                } else if let Some(st) = xs_child(&body, "simpleType") {
                    let def = self.simple_type(ctx, &st)?;
                    TypeRef::Anon(self.push_type(TypeDef::Simple(def)))
                } else {
                    return Err(unsupported(ctx, "restriction without base"));
                };
                self.simple_restriction(ctx, &body, base)
            }
            "union" => {
                let mut members = Vec::new();
                if let Some(list) = body.attribute("memberTypes") {
                    for m in list.split_whitespace() {
                        members.push(TypeRef::Named(resolve_qname(ctx, &body, m)?));
                    }
                }
                for st in body.children().filter(|n| is_xs(n, "simpleType")) {
                    let def = self.simple_type(ctx, &st)?;
                    members.push(TypeRef::Anon(self.push_type(TypeDef::Simple(def))));
                }
                Ok(SimpleType::Union(members))
            }
            "list" => {
                let item = if let Some(t) = body.attribute("itemType") {
                    TypeRef::Named(resolve_qname(ctx, &body, t)?)
                } else if let Some(st) = xs_child(&body, "simpleType") {
                    let def = self.simple_type(ctx, &st)?;
                    TypeRef::Anon(self.push_type(TypeDef::Simple(def)))
                } else {
                    return Err(unsupported(ctx, "list without item type"));
                };
                Ok(SimpleType::List(item))
            }
            other => Err(unsupported(ctx, &format!("simpleType/{other}"))),
        }
    }

    fn simple_restriction(
        &mut self,
        ctx: &Ctx<'_>,
        node: &Node<'_, '_>,
        base: TypeRef,
    ) -> Result<SimpleType, SchemaError> {
        let mut enumerations = Vec::new();
        let mut patterns = Vec::new();
        let mut min_length = None;
        let mut max_length = None;
        for facet in node.children().filter(|n| n.is_element()) {
            if facet.tag_name().namespace() != Some(XS) {
                continue;
            }
            let value = facet.attribute("value");
            match facet.tag_name().name() {
                "enumeration" => enumerations.push(value.unwrap_or("").to_string()),
                "pattern" => {
                    let src = value.unwrap_or("");
                    let re = Regex::new(&format!("^(?:{})$", translate_pattern(src)))
                        .map_err(|e| unsupported(ctx, &format!("pattern {src:?}: {e}")))?;
                    patterns.push(re);
                }
                "length" => {
                    let n = parse_facet(ctx, value)?;
                    min_length = Some(n);
                    max_length = Some(n);
                }
                "minLength" => min_length = Some(parse_facet(ctx, value)?),
                "maxLength" => max_length = Some(parse_facet(ctx, value)?),
                "annotation" | "simpleType" | "whiteSpace" => {}
                // Numeric range facets are not used by the bundled schemas.
                other => return Err(unsupported(ctx, &format!("facet xs:{other}"))),
            }
        }
        Ok(SimpleType::Restriction {
            base,
            enumerations,
            patterns,
            min_length,
            max_length,
        })
    }

    /// Validates a complete document. The root element must match a global
    /// element declaration.
    pub fn validate_str(&self, xml: &str) -> Result<(), Vec<String>> {
        let doc = Document::parse(xml).map_err(|e| vec![format!("not well-formed: {e}")])?;
        self.validate_node(doc.root_element())
    }

    /// Validates `node` against the global declaration of its name.
    pub fn validate_node(&self, node: Node<'_, '_>) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let name = node_qname(&node);
        match self.elements.get(&name) {
            Some(decl) => self.check_element(&node, &decl.ty, &format!("/{}", node.tag_name().name()), &mut errors),
            None => errors.push(format!("no global declaration for root element {name:?}")),
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// True when the set declares a global element with this name.
    pub fn declares(&self, ns: &str, local: &str) -> bool {
        self.elements.contains_key(&QName::new(ns, local))
    }

    fn lookup_type(&self, r: &TypeRef) -> Option<Resolved<'_>> {
        match r {
            TypeRef::Any => Some(Resolved::AnyType),
            TypeRef::Anon(i) => Some(Resolved::Def(&self.types[*i])),
            TypeRef::Named(q) => {
                if let Some(i) = self.named_types.get(q) {
                    Some(Resolved::Def(&self.types[*i]))
                } else if q.ns == XS {
                    if q.local == "anyType" {
                        Some(Resolved::AnyType)
                    } else {
                        Builtin::from_name(&q.local).map(Resolved::Builtin)
                    }
                } else {
                    None
                }
            }
        }
    }

    fn check_element(&self, node: &Node<'_, '_>, ty: &TypeRef, path: &str, errors: &mut Vec<String>) {
        match self.lookup_type(ty) {
            None => errors.push(format!("{path}: unresolved type {ty:?}")),
            Some(Resolved::AnyType) => {}
            Some(Resolved::Builtin(_)) | Some(Resolved::Def(TypeDef::Simple(_))) => {
                self.check_no_attributes(node, path, errors);
                if node.children().any(|c| c.is_element()) {
                    errors.push(format!("{path}: element children not allowed in simple content"));
                }
                if let Err(e) = self.check_simple(ty, &text_of(node)) {
                    errors.push(format!("{path}: {e}"));
                }
            }
            Some(Resolved::Def(TypeDef::Complex(ct))) => self.check_complex(node, ct, path, errors),
        }
    }

    fn check_no_attributes(&self, node: &Node<'_, '_>, path: &str, errors: &mut Vec<String>) {
        for a in node.attributes() {
            if a.namespace() != Some(XSI) {
                errors.push(format!("{path}: attribute {:?} not allowed", a.name()));
            }
        }
    }

    fn collect_attributes(&self, ct: &ComplexType, uses: &mut Vec<AttrUse>, any: &mut bool) {
        if let Some(base) = &ct.extends {
            if let Some(Resolved::Def(TypeDef::Complex(b))) = self.lookup_type(&TypeRef::Named(base.clone())) {
                self.collect_attributes(b, uses, any);
            }
        }
        *any |= ct.any_attribute;
        uses.extend(ct.attributes.iter().cloned());
        let mut pending: Vec<QName> = ct.attribute_groups.clone();
        while let Some(g) = pending.pop() {
            if let Some((us, refs)) = self.attribute_groups.get(&g) {
                uses.extend(us.iter().cloned());
                pending.extend(refs.iter().cloned());
            }
        }
    }

    fn check_complex(&self, node: &Node<'_, '_>, ct: &ComplexType, path: &str, errors: &mut Vec<String>) {
        let mut uses = Vec::new();
        let mut any_attr = false;
        self.collect_attributes(ct, &mut uses, &mut any_attr);

        for a in node.attributes() {
            if a.namespace() == Some(XSI) {
                continue;
            }
            let name = QName::new(a.namespace().unwrap_or(""), a.name());
            match uses.iter().find(|u| u.name == name && !u.prohibited) {
                Some(u) => {
                    let ty = if u.global_ref {
                        match self.attributes.get(&u.name) {
                            Some(t) => t.clone(),
                            None => {
                                errors.push(format!("{path}: unresolved attribute reference {:?}", u.name));
                                continue;
                            }
                        }
                    } else {
                        u.ty.clone()
                    };
                    if let Err(e) = self.check_simple(&ty, a.value()) {
                        errors.push(format!("{path}/@{}: {e}", a.name()));
                    }
                }
                None if any_attr => {}
                None => errors.push(format!("{path}: attribute {name:?} not allowed")),
            }
        }
        for u in uses.iter().filter(|u| u.required) {
            let present = node
                .attributes()
                .any(|a| a.name() == u.name.local && a.namespace().unwrap_or("") == u.name.ns);
            if !present {
                errors.push(format!("{path}: required attribute {:?} missing", u.name));
            }
        }

        let content = self.effective_content(ct);
        match content {
            EffContent::Any => {}
            EffContent::Simple(ty) => {
                if node.children().any(|c| c.is_element()) {
                    errors.push(format!("{path}: element children not allowed in simple content"));
                }
                if let Err(e) = self.check_simple(&ty, &text_of(node)) {
                    errors.push(format!("{path}: {e}"));
                }
            }
            EffContent::Empty => {
                if node.children().any(|c| c.is_element()) {
                    errors.push(format!("{path}: element content not allowed"));
                }
                if !ct.mixed && !text_of(node).trim().is_empty() {
                    errors.push(format!("{path}: character content not allowed"));
                }
            }
            EffContent::Particles(parts) => {
                if !ct.mixed {
                    for t in node.children().filter(|c| c.is_text()) {
                        if !t.text().unwrap_or("").trim().is_empty() {
                            errors.push(format!("{path}: character content not allowed"));
                            break;
                        }
                    }
                }
                let kids: Vec<Node<'_, '_>> = node.children().filter(|c| c.is_element()).collect();
                let seq = Particle {
                    term: Term::Sequence(parts),
                    min: 1,
                    max: Some(1),
                };
                let outcomes = self.match_particle(&seq, &kids, 0);
                match outcomes.into_iter().find(|(end, _)| *end == kids.len()) {
                    None => {
                        let names: Vec<String> = kids.iter().map(|k| k.tag_name().name().to_string()).collect();
                        errors.push(format!("{path}: children [{}] do not match content model", names.join(", ")));
                    }
                    Some((_, assignment)) => {
                        for (i, how) in assignment {
                            let kid = &kids[i];
                            let kpath = format!("{path}/{}[{i}]", kid.tag_name().name());
                            match how {
                                Assign::Decl(ty) => self.check_element(kid, &ty, &kpath, errors),
                                Assign::Wild(Process::Skip) => {}
                                Assign::Wild(process) => match self.elements.get(&node_qname(kid)) {
                                    Some(decl) => self.check_element(kid, &decl.ty, &kpath, errors),
                                    None if process == Process::Lax => {}
                                    None => errors.push(format!(
                                        "{kpath}: strict wildcard but no declaration for {:?}",
                                        node_qname(kid)
                                    )),
                                },
                            }
                        }
                    }
                }
            }
        }
    }

    fn effective_content(&self, ct: &ComplexType) -> EffContent {
        let mut parts = Vec::new();
        if let Some(base) = &ct.extends {
            match self.lookup_type(&TypeRef::Named(base.clone())) {
                Some(Resolved::Def(TypeDef::Complex(b))) => match self.effective_content(b) {
                    EffContent::Particles(p) => parts.extend(p),
                    EffContent::Empty => {}
                    other => return other,
                },
                _ => return EffContent::Any,
            }
        }
        match &ct.content {
            Content::Simple(t) => EffContent::Simple(t.clone()),
            Content::Empty if parts.is_empty() => EffContent::Empty,
            Content::Empty => EffContent::Particles(parts),
            Content::Elements(p) => {
                parts.push(p.clone());
                EffContent::Particles(parts)
            }
        }
    }

    /// Returns every reachable (position, assignment) after matching `p`
    /// starting at `pos`. Assignments are deduplicated by position; the
    /// schemas satisfy unique particle attribution, so the first one found
    /// for a position is the only one.
    fn match_particle(&self, p: &Particle, kids: &[Node<'_, '_>], pos: usize) -> Vec<(usize, Vec<(usize, Assign)>)> {
        let mut results: BTreeMap<usize, Vec<(usize, Assign)>> = BTreeMap::new();
        if p.min == 0 {
            results.insert(pos, Vec::new());
        }
        let mut frontier: BTreeMap<usize, Vec<(usize, Assign)>> = BTreeMap::new();
        frontier.insert(pos, Vec::new());
        let mut count = 0u32;
        while !frontier.is_empty() && p.max.is_none_or(|m| count < m) {
            count += 1;
            let mut next: BTreeMap<usize, Vec<(usize, Assign)>> = BTreeMap::new();
            for (start, acc) in &frontier {
                for (end, assign) in self.match_term(&p.term, kids, *start) {
                    let mut combined = acc.clone();
                    combined.extend(assign);
                    next.entry(end).or_insert(combined);
                }
            }
            if count >= p.min {
                // Positions already reached were already expanded.
                next.retain(|end, _| !results.contains_key(end));
                for (end, acc) in &next {
                    results.insert(*end, acc.clone());
                }
            }
            frontier = next;
        }
        results.into_iter().collect()
    }

    fn match_term(&self, term: &Term, kids: &[Node<'_, '_>], pos: usize) -> Vec<(usize, Vec<(usize, Assign)>)> {
        match term {
            Term::Element(decl) => match kids.get(pos) {
                Some(k) if node_qname(k) == decl.name => vec![(pos + 1, vec![(pos, Assign::Decl(decl.ty.clone()))])],
                _ => Vec::new(),
            },
            Term::ElementRef(name) => match (kids.get(pos), self.elements.get(name)) {
                (Some(k), Some(decl)) if node_qname(k) == *name => {
                    vec![(pos + 1, vec![(pos, Assign::Decl(decl.ty.clone()))])]
                }
                _ => Vec::new(),
            },
            Term::Any { ns, process } => match kids.get(pos) {
                Some(k) if ns_allowed(ns, k.tag_name().namespace().unwrap_or("")) => {
                    vec![(pos + 1, vec![(pos, Assign::Wild(*process))])]
                }
                _ => Vec::new(),
            },
            Term::Group(name) => match self.groups.get(name) {
                Some(p) => self.match_particle(p, kids, pos),
                None => Vec::new(),
            },
            Term::Choice(options) => {
                let mut out: BTreeMap<usize, Vec<(usize, Assign)>> = BTreeMap::new();
                for o in options {
                    for (end, a) in self.match_particle(o, kids, pos) {
                        out.entry(end).or_insert(a);
                    }
                }
                out.into_iter().collect()
            }
            Term::Sequence(parts) => {
                let mut states: BTreeMap<usize, Vec<(usize, Assign)>> = BTreeMap::new();
                states.insert(pos, Vec::new());
                for part in parts {
                    let mut next = BTreeMap::new();
                    for (start, acc) in &states {
                        for (end, a) in self.match_particle(part, kids, *start) {
                            let mut combined = acc.clone();
                            combined.extend(a);
                            next.entry(end).or_insert(combined);
                        }
                    }
                    states = next;
                    if states.is_empty() {
                        break;
                    }
                }
                states.into_iter().collect()
            }
            Term::All(parts) => {
                // Each member at most once, any order.
                let mut used = vec![false; parts.len()];
                let mut acc = Vec::new();
                let mut i = pos;
                'outer: while i < kids.len() {
                    for (j, part) in parts.iter().enumerate() {
                        if used[j] {
                            continue;
                        }
                        let single = Particle {
                            term: part.term.clone(),
                            min: 1,
                            max: Some(1),
                        };
                        if let Some((end, a)) = self.match_particle(&single, kids, i).into_iter().find(|(e, _)| *e > i) {
                            used[j] = true;
                            acc.extend(a);
                            i = end;
                            continue 'outer;
                        }
                    }
                    break;
                }
                let complete = parts.iter().zip(&used).all(|(p, u)| *u || p.min == 0);
                if complete {
                    vec![(i, acc)]
                } else {
                    Vec::new()
                }
            }
        }
    }

    fn check_simple(&self, ty: &TypeRef, raw: &str) -> Result<(), String> {
        match self.lookup_type(ty) {
            None => Err(format!("unresolved simple type {ty:?}")),
            Some(Resolved::AnyType) => Ok(()),
            Some(Resolved::Builtin(b)) => b.check(raw),
            Some(Resolved::Def(TypeDef::Complex(_))) => Err(format!("type {ty:?} is complex, expected simple")),
            Some(Resolved::Def(TypeDef::Simple(st))) => match st {
                SimpleType::Restriction {
                    base,
                    enumerations,
                    patterns,
                    min_length,
                    max_length,
                } => {
                    self.check_simple(base, raw)?;
                    let value = self.normalize(base, raw);
                    if !enumerations.is_empty() && !enumerations.iter().any(|e| *e == value) {
                        return Err(format!("{value:?} not in enumeration {enumerations:?}"));
                    }
                    if !patterns.is_empty() && !patterns.iter().any(|p| p.is_match(&value)) {
                        return Err(format!("{value:?} does not match pattern"));
                    }
                    let len = value.chars().count();
                    if min_length.is_some_and(|m| len < m) || max_length.is_some_and(|m| len > m) {
                        return Err(format!("{value:?} violates length facets"));
                    }
                    Ok(())
                }
                SimpleType::Union(members) => {
                    if members.iter().any(|m| self.check_simple(m, raw).is_ok()) {
                        Ok(())
                    } else {
                        Err(format!("{raw:?} matches no member of union"))
                    }
                }
                SimpleType::List(item) => raw.split_whitespace().try_for_each(|v| self.check_simple(item, v)),
            },
        }
    }

    /// Applies the whitespace facet of the primitive base of `ty`.
    fn normalize(&self, ty: &TypeRef, raw: &str) -> String {
        match self.lookup_type(ty) {
            Some(Resolved::Builtin(b)) => b.normalize(raw),
            Some(Resolved::Def(TypeDef::Simple(SimpleType::Restriction { base, .. }))) => self.normalize(base, raw),
            _ => raw.to_string(),
        }
    }
}

enum Resolved<'a> {
    AnyType,
    Builtin(Builtin),
    Def(&'a TypeDef),
}

enum EffContent {
    Any,
    Empty,
    Simple(TypeRef),
    Particles(Vec<Particle>),
}

#[derive(Debug, Clone)]
enum Assign {
    Decl(TypeRef),
    Wild(Process),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Builtin {
    AnySimple,
    String,
    NormalizedString,
    Token,
    Language,
    Name,
    NcName,
    NmToken,
    AnyUri,
    Boolean,
    Decimal,
    Integer,
    NonNegativeInteger,
    PositiveInteger,
    Int,
    DateTime,
    Date,
}

impl Builtin {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "anySimpleType" => Builtin::AnySimple,
            "string" => Builtin::String,
            "normalizedString" => Builtin::NormalizedString,
            "token" => Builtin::Token,
            "language" => Builtin::Language,
            "Name" => Builtin::Name,
            "NCName" | "ID" | "IDREF" => Builtin::NcName,
            "NMTOKEN" => Builtin::NmToken,
            "anyURI" => Builtin::AnyUri,
            "boolean" => Builtin::Boolean,
            "decimal" => Builtin::Decimal,
            "integer" => Builtin::Integer,
            "nonNegativeInteger" => Builtin::NonNegativeInteger,
            "positiveInteger" => Builtin::PositiveInteger,
            "int" => Builtin::Int,
            "dateTime" => Builtin::DateTime,
            "date" => Builtin::Date,
            _ => return None,
        })
    }

    fn normalize(self, raw: &str) -> String {
        match self {
            Builtin::String | Builtin::AnySimple => raw.to_string(),
            Builtin::NormalizedString => raw.replace(['\t', '\n', '\r'], " "),
            _ => raw.split_whitespace().collect::<Vec<_>>().join(" "),
        }
    }

    fn check(self, raw: &str) -> Result<(), String> {
        let v = self.normalize(raw);
        let ok = match self {
            Builtin::AnySimple | Builtin::String | Builtin::NormalizedString | Builtin::Token => true,
            Builtin::Language => lexical(r"[a-zA-Z]{1,8}(-[a-zA-Z0-9]{1,8})*").is_match(&v),
            Builtin::Name => lexical(r"[A-Za-z_:][-._:A-Za-z0-9]*").is_match(&v),
            Builtin::NcName => lexical(r"[A-Za-z_][-._A-Za-z0-9]*").is_match(&v),
            Builtin::NmToken => lexical(r"[-._:A-Za-z0-9]+").is_match(&v),
            Builtin::AnyUri => !v.chars().any(|c| c.is_control()),
            Builtin::Boolean => matches!(v.as_str(), "true" | "false" | "1" | "0"),
            Builtin::Decimal => lexical(r"[+-]?(\d+(\.\d*)?|\.\d+)").is_match(&v),
            Builtin::Integer => lexical(r"[+-]?\d+").is_match(&v),
            Builtin::NonNegativeInteger => {
                lexical(r"\+?\d+").is_match(&v) || lexical(r"-0+").is_match(&v)
            }
            Builtin::PositiveInteger => lexical(r"\+?\d+").is_match(&v) && v.trim_start_matches('+').trim_start_matches('0') != "",
            Builtin::Int => v.parse::<i32>().is_ok(),
            Builtin::DateTime => check_datetime(&v),
            Builtin::Date => check_date(&v),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{v:?} is not a valid xs:{self:?}"))
        }
    }
}

fn lexical(pattern: &str) -> Regex {
    Regex::new(&format!("^(?:{pattern})$")).expect("builtin pattern")
}

fn check_tz(tz: &str) -> bool {
    if tz.is_empty() || tz == "Z" {
        return true;
    }
    let re = lexical(r"[+-](\d{2}):(\d{2})");
    match re.captures(tz) {
        Some(c) => {
            let h: u32 = c[1].parse().unwrap_or(99);
            let m: u32 = c[2].parse().unwrap_or(99);
            (h < 14 && m < 60) || (h == 14 && m == 0)
        }
        None => false,
    }
}

fn check_ymd(y: &str, m: &str, d: &str) -> bool {
    let (Ok(y), Ok(m), Ok(d)) = (y.parse::<i32>(), m.parse::<u32>(), d.parse::<u32>()) else {
        return false;
    };
    // xs:date has no year zero; chrono uses proleptic numbering, good enough here.
    y != 0 && chrono::NaiveDate::from_ymd_opt(y, m, d).is_some()
}

fn check_date(v: &str) -> bool {
    let re = lexical(r"(-?\d{4,})-(\d{2})-(\d{2})(Z|[+-]\d{2}:\d{2})?");
    match re.captures(v) {
        Some(c) => check_ymd(&c[1], &c[2], &c[3]) && check_tz(c.get(4).map_or("", |m| m.as_str())),
        None => false,
    }
}

fn check_datetime(v: &str) -> bool {
    let re = lexical(r"(-?\d{4,})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(\.\d+)?(Z|[+-]\d{2}:\d{2})?");
    let Some(c) = re.captures(v) else {
        return false;
    };
    let h: u32 = c[4].parse().unwrap_or(99);
    let mi: u32 = c[5].parse().unwrap_or(99);
    let s: u32 = c[6].parse().unwrap_or(99);
    let end_of_day = h == 24 && mi == 0 && s == 0 && c.get(7).is_none_or(|f| f.as_str().trim_matches(['.', '0']).is_empty());
    check_ymd(&c[1], &c[2], &c[3])
        && (end_of_day || (h < 24 && mi < 60 && s < 60))
        && check_tz(c.get(8).map_or("", |m| m.as_str()))
}

/// Maps XSD regular expression syntax onto the `regex` crate's dialect.
fn translate_pattern(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut chars = src.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('i') => out.push_str("[A-Za-z_:]"),
                Some('I') => out.push_str("[^A-Za-z_:]"),
                Some('c') => out.push_str("[-._:A-Za-z0-9]"),
                Some('C') => out.push_str("[^-._:A-Za-z0-9]"),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push_str("\\\\"),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn ns_allowed(constraint: &NsConstraint, ns: &str) -> bool {
    match constraint {
        NsConstraint::Any => true,
        NsConstraint::Other(target) => !ns.is_empty() && ns != target,
        NsConstraint::List(list) => list.iter().any(|u| u == ns),
    }
}

fn node_qname(node: &Node<'_, '_>) -> QName {
    QName::new(node.tag_name().namespace().unwrap_or(""), node.tag_name().name())
}

fn text_of(node: &Node<'_, '_>) -> String {
    node.children().filter(|c| c.is_text()).filter_map(|c| c.text()).collect()
}

fn is_xs(node: &Node<'_, '_>, name: &str) -> bool {
    node.is_element() && node.tag_name().namespace() == Some(XS) && node.tag_name().name() == name
}

fn xs_child<'a, 'input>(node: &Node<'a, 'input>, name: &str) -> Option<Node<'a, 'input>> {
    node.children().find(|c| is_xs(c, name))
}

fn first_xs_element<'a, 'input>(node: &Node<'a, 'input>) -> Option<Node<'a, 'input>> {
    node.children()
        .find(|c| c.is_element() && c.tag_name().namespace() == Some(XS) && c.tag_name().name() != "annotation")
}

fn required_attr<'a>(ctx: &Ctx<'_>, node: &Node<'a, '_>, name: &str) -> Result<&'a str, SchemaError> {
    node.attribute(name).ok_or_else(|| SchemaError::Parse {
        path: ctx.path.to_string(),
        message: format!("xs:{} missing @{name}", node.tag_name().name()),
    })
}

fn resolve_qname(ctx: &Ctx<'_>, node: &Node<'_, '_>, raw: &str) -> Result<QName, SchemaError> {
    let (prefix, local) = match raw.split_once(':') {
        Some((p, l)) => (Some(p), l),
        None => (None, raw),
    };
    let ns = match prefix {
        Some("xml") => Some(XML_NS),
        Some(p) => node.lookup_namespace_uri(Some(p)),
        None => node.lookup_namespace_uri(None),
    };
    match (prefix, ns) {
        (_, Some(ns)) => Ok(QName::new(ns, local)),
        (None, None) => Ok(QName::new("", local)),
        (Some(p), None) => Err(SchemaError::Parse {
            path: ctx.path.to_string(),
            message: format!("unbound prefix {p:?} in {raw:?}"),
        }),
    }
}

fn parse_facet(ctx: &Ctx<'_>, value: Option<&str>) -> Result<usize, SchemaError> {
    value
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| unsupported(ctx, "non-numeric length facet"))
}

fn unsupported(ctx: &Ctx<'_>, message: &str) -> SchemaError {
    SchemaError::Unsupported {
        path: ctx.path.to_string(),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r###"<schema xmlns="http://www.w3.org/2001/XMLSchema"
        xmlns:t="urn:t" targetNamespace="urn:t" elementFormDefault="qualified">
      <element name="root">
        <complexType>
          <sequence>
            <element name="a" type="t:code" maxOccurs="unbounded"/>
            <element name="b" type="dateTime" minOccurs="0"/>
            <any namespace="##other" processContents="skip" minOccurs="0"/>
          </sequence>
          <attribute name="n" type="positiveInteger" use="required"/>
        </complexType>
      </element>
      <simpleType name="code">
        <restriction base="string"><pattern value="[a-z]+(:[a-z]+)*"/></restriction>
      </simpleType>
    </schema>"###;

    fn mini() -> SchemaSet {
        let mut s = SchemaSet::new();
        s.add_str("mini", MINI).unwrap();
        s
    }

    #[test]
    fn accepts_conforming_instance() {
        let doc = r#"<root xmlns="urn:t" n="3"><a>x</a><a>x:y</a><b>2008-05-01T10:00:00Z</b><o:z xmlns:o="urn:o"/></root>"#;
        mini().validate_str(doc).unwrap();
    }

    #[test]
    fn rejects_missing_required_child_and_attribute() {
        let errs = mini().validate_str(r#"<root xmlns="urn:t"><b>2008-05-01T10:00:00Z</b></root>"#).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("required attribute")));
        assert!(errs.iter().any(|e| e.contains("content model")));
    }

    #[test]
    fn rejects_bad_simple_values() {
        let s = mini();
        assert!(s.validate_str(r#"<root xmlns="urn:t" n="0"><a>x</a></root>"#).is_err());
        assert!(s.validate_str(r#"<root xmlns="urn:t" n="1"><a>X</a></root>"#).is_err());
        assert!(s.validate_str(r#"<root xmlns="urn:t" n="1"><a>x</a><b>2008-13-01T00:00:00Z</b></root>"#).is_err());
    }

    #[test]
    fn wildcard_respects_namespace_constraint() {
        let s = mini();
        assert!(s.validate_str(r#"<root xmlns="urn:t" n="1"><a>x</a><c/></root>"#).is_err());
    }

    #[test]
    fn datetime_lexical_space() {
        assert!(check_datetime("2008-02-29T23:59:59Z"));
        assert!(!check_datetime("2007-02-29T23:59:59Z"));
        assert!(check_datetime("2008-01-01T00:00:00.5+05:30"));
        assert!(!check_datetime("2008-01-01 00:00:00Z"));
        assert!(check_date("2008-01-01"));
        assert!(!check_date("2008-1-01"));
    }
}
